/* Minimal C consumer: load a model, interpret a script, print what the run
 * said, and check the trace against the model's constraints.
 *
 * Build (from the repository root, after `cargo build -p tmkit-ffi`):
 *
 *   cc -std=c99 -Wall -Icrates/tmkit-ffi/include \
 *      crates/tmkit-ffi/examples/booking.c \
 *      target/debug/libtmkit_ffi.a -lpthread -ldl -lm -o booking
 *
 *   ./booking corpus/flight.tm corpus/flight_michael.tms
 *
 * Exits 0 when the trace conforms, 3 when it violates a constraint, and 1
 * on any toolkit error.
 */

#include <stdio.h>
#include <stdlib.h>

#include "tmkit.h"

static char *slurp(const char *path) {
  FILE *f = fopen(path, "rb");
  if (f == NULL) {
    fprintf(stderr, "cannot open %s\n", path);
    exit(2);
  }
  if (fseek(f, 0, SEEK_END) != 0) {
    exit(2);
  }
  long size = ftell(f);
  rewind(f);
  char *text = malloc((size_t)size + 1);
  if (text == NULL || fread(text, 1, (size_t)size, f) != (size_t)size) {
    fprintf(stderr, "cannot read %s\n", path);
    exit(2);
  }
  text[size] = '\0';
  fclose(f);
  return text;
}

int main(int argc, char **argv) {
  if (argc != 3) {
    fprintf(stderr, "usage: %s <model.tm> <script.tms>\n", argv[0]);
    return 2;
  }
  char *model_text = slurp(argv[1]);
  char *script_text = slurp(argv[2]);

  TmkBundle *bundle = NULL;
  if (tmk_bundle_parse(model_text, &bundle) != TMK_STATUS_OK) {
    fprintf(stderr, "model: %s\n", tmk_last_error());
    return 1;
  }

  TmkRun *run = NULL;
  if (tmk_run_script(bundle, script_text, &run) != TMK_STATUS_OK) {
    fprintf(stderr, "script: %s\n", tmk_last_error());
    tmk_run_free(run);
    tmk_bundle_free(bundle);
    return 1;
  }

  char *messages = tmk_run_messages(run);
  if (messages[0] != '\0') {
    printf("%s\n", messages);
  }
  tmk_string_free(messages);

  char *report = NULL;
  TmkStatus verdict = tmk_evaluate(bundle, run, &report);
  if (verdict != TMK_STATUS_OK && verdict != TMK_STATUS_VIOLATIONS) {
    fprintf(stderr, "evaluate: %s\n", tmk_last_error());
    tmk_run_free(run);
    tmk_bundle_free(bundle);
    return 1;
  }
  printf("%s", report);

  tmk_string_free(report);
  tmk_run_free(run);
  tmk_bundle_free(bundle);
  free(script_text);
  free(model_text);
  return verdict == TMK_STATUS_OK ? 0 : 3;
}
