/* The public header must compile as C and the library must link from C. */
#include <math.h>
#include <stdio.h>

#include "mvgf/mvgf.h"

int main(void) {
  mvgf_model* model = NULL;
  double b = 0.0;
  if (mvgf_model_create("fermi-dirac", 0.0, &model) != MVGF_OK) return 1;
  if (mvgf_model_eval(model, MVGF_FN_B, 0.25, &b) != MVGF_OK) return 1;
  mvgf_model_destroy(model);
  if (fabs(b - 0.75) > 1e-15) return 1;
  if (mvgf_model_create("bogus", 0.0, &model) != MVGF_VALIDATION_ERROR) return 1;
  printf("mvgf %s from C: b(0.25) = %g, last error: %s\n", mvgf_version(), b, mvgf_last_error());
  return 0;
}
