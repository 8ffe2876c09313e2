/* Exercises the C interface end to end from plain C. */
#include <fastdraw/fastdraw.h>

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

#define EXPECT_OK(call)                                                          \
  do {                                                                           \
    fd_status st_ = (call);                                                      \
    if (st_ != FD_OK) {                                                          \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call,        \
              fd_status_name(st_), fd_last_error());                             \
      ++failures;                                                                \
    }                                                                            \
  } while (0)

static void join(char* out, size_t n, const char* dir, const char* name) {
  snprintf(out, n, "%s/%s", dir, name);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: test_capi <work dir>\n");
    return 2;
  }
  const char* work = argv[1];
  char path[1024], req[4096], gen_dir[1024], run_dir[1024];
  char* summary = NULL;

  EXPECT(fd_version() != NULL && strlen(fd_version()) > 0);
  EXPECT(strcmp(fd_status_name(FD_ERR_CONFIG), "config") == 0);

  /* Error reporting. */
  fd_config* cfg = NULL;
  EXPECT_OK(fd_config_load(NULL, &cfg));
  EXPECT(fd_config_set(cfg, "decode.nope=1") == FD_ERR_CONFIG);
  EXPECT(strstr(fd_last_error(), "decode.nope") != NULL);
  EXPECT(fd_config_set(NULL, "L=6") == FD_ERR_INVALID_ARGUMENT);
  EXPECT(fd_config_load("/nonexistent/config.json", &cfg) == FD_ERR_IO);
  fd_field* missing = NULL;
  EXPECT(fd_field_load("/nonexistent/field.fdt", &missing) == FD_ERR_IO);
  EXPECT(missing == NULL);

  /* A tiny network trained for one epoch on two scenes. */
  EXPECT_OK(fd_config_set(cfg, "generate.count=2"));
  EXPECT_OK(fd_config_set(cfg, "train.epochs=1"));
  EXPECT_OK(fd_config_set(cfg, "arch.head_hidden=4"));
  EXPECT_OK(fd_config_set(cfg, "train.threads=1"));
  join(gen_dir, sizeof gen_dir, work, "gen");
  join(run_dir, sizeof run_dir, work, "run");
  EXPECT_OK(fd_cmd_generate(cfg, gen_dir, &summary));
  EXPECT(summary != NULL && strstr(summary, "\"images\":2") != NULL);
  fd_string_free(summary);
  summary = NULL;

  snprintf(req, sizeof req, "{\"manifest\": \"%s/manifest.json\", \"out_dir\": \"%s\"}", gen_dir,
           run_dir);
  EXPECT_OK(fd_cmd_train(cfg, req, &summary));
  EXPECT(summary != NULL && strstr(summary, "final.fdck") != NULL);
  fd_string_free(summary);
  summary = NULL;
  EXPECT(fd_cmd_train(cfg, "{not json", NULL) == FD_ERR_FORMAT);

  fd_net* net = NULL;
  join(path, sizeof path, run_dir, "final.fdck");
  EXPECT_OK(fd_net_load(path, &net));
  fd_field* field = NULL;
  join(path, sizeof path, gen_dir, "images/scene_00000.ppm");
  EXPECT_OK(fd_net_predict_ppm(net, path, &field));
  int H = 0, W = 0, L = 0;
  EXPECT_OK(fd_field_shape(field, &H, &W, &L));
  EXPECT(H == 64 && W == 128 && L == 6);
  float p = -1.0f;
  EXPECT_OK(fd_field_lane_prob(field, 10, 10, &p));
  EXPECT(p >= 0.0f && p <= 1.0f);
  EXPECT(fd_field_lane_prob(field, H, 0, &p) == FD_ERR_INDEX);
  double u = -1.0;
  EXPECT_OK(fd_uncertainty(field, 5, 5, FD_UP, &u));
  EXPECT(u >= 0.0 && u <= 6.0);

  /* Save, reload, decode; both copies decode identically. */
  join(path, sizeof path, work, "f.fdt");
  EXPECT_OK(fd_field_save(field, path));
  fd_field* again = NULL;
  EXPECT_OK(fd_field_load(path, &again));
  EXPECT_OK(fd_config_set(cfg, "decode.p_min=0.3"));
  fd_lanes* a = NULL;
  fd_lanes* b = NULL;
  EXPECT_OK(fd_decode(field, cfg, &a));
  EXPECT_OK(fd_decode(again, cfg, &b));
  EXPECT(fd_lanes_count(a) == fd_lanes_count(b));
  for (size_t i = 0; i < fd_lanes_count(a); ++i) {
    size_t n = 0;
    EXPECT_OK(fd_lanes_points(a, i, NULL, NULL, NULL, 0, &n));
    EXPECT(n >= 2);
    int* rows = malloc(n * sizeof *rows);
    double* cols = malloc(n * sizeof *cols);
    double* stds = malloc(n * sizeof *stds);
    EXPECT_OK(fd_lanes_points(a, i, rows, cols, stds, n, &n));
    for (size_t k = 1; k < n; ++k) EXPECT(rows[k] == rows[k - 1] + 1);
    for (size_t k = 0; k < n; ++k) EXPECT(isfinite(stds[k]) && stds[k] >= 0.0);
    free(rows);
    free(cols);
    free(stds);
  }
  size_t n = 0;
  EXPECT(fd_lanes_points(a, fd_lanes_count(a), NULL, NULL, NULL, 0, &n) == FD_ERR_INDEX);

  char* cfg_json = NULL;
  EXPECT_OK(fd_config_to_json(cfg, &cfg_json));
  EXPECT(cfg_json != NULL && strstr(cfg_json, "\"p_min\": 0.3") != NULL);
  fd_string_free(cfg_json);

  fd_lanes_free(a);
  fd_lanes_free(b);
  fd_field_free(field);
  fd_field_free(again);
  fd_net_free(net);
  fd_config_free(cfg);
  /* Freeing NULL is a no-op. */
  fd_lanes_free(NULL);
  fd_field_free(NULL);
  fd_net_free(NULL);
  fd_config_free(NULL);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("C API: all checks passed\n");
  return failures ? 1 : 0;
}
