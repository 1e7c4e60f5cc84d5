#include <stdio.h>
#include <string.h>

#include "occ.h"

#define CHECK(expr)                                                        \
  do {                                                                     \
    if (!(expr)) {                                                         \
      char msg[256];                                                       \
      occ_last_error_message(msg, sizeof msg);                             \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #expr, msg); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(int argc, char **argv) {
  const double origin[3] = {0.0, 0.0, 0.0};
  const size_t dims[3] = {4, 1, 1};
  OccGrid *pred = NULL;
  OccGrid *gt = NULL;
  CHECK(occ_grid_new(origin, dims, 1.0, &pred) == OCC_STATUS_OK);
  CHECK(occ_grid_new(origin, dims, 1.0, &gt) == OCC_STATUS_OK);
  const uint8_t p[4] = {1, 1, 1, 1};
  const uint8_t g[4] = {1, 1, 2, 2};
  CHECK(occ_grid_set_labels(pred, p, 4) == OCC_STATUS_OK);
  CHECK(occ_grid_set_labels(gt, g, 4) == OCC_STATUS_OK);

  double iou = 0.0, miou = 0.0;
  CHECK(occ_eval(pred, gt, false, &iou, &miou) == OCC_STATUS_OK);
  CHECK(iou == 1.0 && miou == 0.25);

  CHECK(occ_grid_set(pred, 9, 0, 0, 1) == OCC_STATUS_OUT_OF_RANGE);
  CHECK(occ_last_error_length() > 0);

  if (argc > 1) {
    CHECK(occ_grid_write(gt, argv[1]) == OCC_STATUS_OK);
    OccGrid *back = NULL;
    CHECK(occ_grid_read(argv[1], &back) == OCC_STATUS_OK);
    size_t n = 0;
    const uint8_t *labels = occ_grid_labels(back, &n);
    CHECK(n == 4 && memcmp(labels, g, 4) == 0);
    occ_grid_free(back);
  }

  occ_grid_free(pred);
  occ_grid_free(gt);
  puts("ok");
  return 0;
}
