#ifndef CSROBUST_H
#define CSROBUST_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum csr_status {
  CSR_OK = 0,
  CSR_INVALID_SPEC,
  CSR_SHAPE_MISMATCH,
  CSR_PARSE,
  CSR_NUMERICAL_FAILURE,
  CSR_UNDEFINED_RATIO,
  CSR_CAPABILITY,
  CSR_IO,
  CSR_MISSING_INPUT,
  CSR_SCHEMA,
  CSR_INTERNAL
} csr_status;

typedef struct csr_volume csr_volume;
typedef struct csr_run_result csr_run_result;

const char* csr_version(void);
const char* csr_status_name(csr_status status);
/* Message of the last failing call on this thread; "" after a success. */
const char* csr_last_error(void);
/* Process exit code for a status: 0 ok, 2 schema/spec/parse, 3 missing input, 4 numerical, 1 otherwise. */
int csr_exit_code(csr_status status);

size_t csr_command_count(void);
const char* csr_command_name(size_t index);

/* out_dir may be NULL to use the config's output_dir. */
csr_status csr_run(const char* command, const char* config_path, const char* out_dir, int jobs,
                   csr_run_result** result);
const char* csr_run_out_dir(const csr_run_result* result);
size_t csr_run_artifact_count(const csr_run_result* result);
const char* csr_run_artifact(const csr_run_result* result, size_t index);
void csr_run_free(csr_run_result* result);

csr_status csr_volume_read(const char* path, csr_volume** volume);
csr_status csr_volume_write(const csr_volume* volume, const char* path);
csr_status csr_volume_dims(const csr_volume* volume, int* n_coils, int* height, int* width);
/* Magnitude of the ground-truth image, height*width doubles, row-major. */
csr_status csr_volume_target(const csr_volume* volume, double* out, size_t out_len);
void csr_volume_free(csr_volume* volume);

/* method_json: one method object as in experiment configs, e.g.
   {"id":"zf","family":"zero_filled"}. mask_json may be NULL for the default mask. */
csr_status csr_reconstruct(const csr_volume* volume, const char* method_json, const char* mask_json, double* out,
                           size_t out_len);

/* metric: "nmse", "psnr" or "ssim". Images are height*width doubles, row-major. */
csr_status csr_metric(const char* metric, const double* reference, const double* test, int height, int width,
                      double* value);

#ifdef __cplusplus
}
#endif

#endif
