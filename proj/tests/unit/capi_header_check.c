/* Copyright 2026 The RefSD Authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <stdio.h>
#include <string.h>

#include "refsd/refsd.h"

int main(void) {
  refsd_config* config = NULL;
  char* text = NULL;
  if (refsd_config_load(NULL, 0, &config) != REFSD_OK) return 1;
  if (refsd_config_to_json(config, &text) != REFSD_OK) return 1;
  int ok = strstr(text, "\"seed\"") != NULL;
  refsd_string_free(text);
  refsd_config_free(config);
  if (refsd_image_load(NULL, NULL) != REFSD_ERR_INVALID_ARGUMENT) return 1;
  printf("refsd %s from C: %s\n", refsd_version(), ok ? "ok" : "bad");
  return ok ? 0 : 1;
}
