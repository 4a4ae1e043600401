/* Minimal consumer of the C API: prints the exponent schedule for each
 * alpha given on the command line and checks a rejected layer exponent. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "kato_lab.h"

int main(int argc, char **argv) {
  double betas[64];
  size_t len = 0;
  for (int i = 1; i < argc; i++) {
    double alpha = atof(argv[i]);
    KatoStatus s = kato_beta_schedule(alpha, KATO_LAYER_MODE_KATO, 0.0, betas, 64, &len);
    if (s != KATO_STATUS_OK) {
      fprintf(stderr, "alpha=%g: %s\n", alpha, kato_last_error());
      return (int)s;
    }
    printf("alpha=%g N=%zu", alpha, len - 1);
    for (size_t k = 0; k < len; k++) printf(" %.6f", betas[k]);
    printf("\n");
  }
  if (kato_validate_smooth_mode(0.4, 7.0, 5.0) != KATO_STATUS_CONFIG_ERROR) return 10;
  if (strstr(kato_last_error(), "a=7") == NULL) return 11;

  KatoConfig *cfg = NULL;
  if (kato_config_from_toml("viscosities = [1e-2, -1.0]\n", &cfg) != KATO_STATUS_CONFIG_ERROR || cfg != NULL)
    return 12;
  printf("version %s\n", kato_version());
  return 0;
}
