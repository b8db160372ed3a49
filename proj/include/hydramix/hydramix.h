#ifndef HYDRAMIX_H
#define HYDRAMIX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HM_API __declspec(dllexport)
#else
#define HM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status. On failure the message of the calling thread's
 * last error is available through hm_last_error() until the next call. */
typedef enum hm_status {
  HM_OK = 0,
  HM_ERR_INVALID_ARGUMENT = 1, /* null pointer or malformed argument */
  HM_ERR_VALIDATION = 2,       /* configuration or data violates a contract */
  HM_ERR_IO = 3,               /* file could not be read or written */
  HM_ERR_FORMAT = 4,           /* file content is malformed */
  HM_ERR_RUNTIME = 5           /* any other failure */
} hm_status;

typedef struct hm_dataset hm_dataset;
typedef struct hm_generator hm_generator;
typedef struct hm_classifier hm_classifier;

/* Receives one JSON object per training step. */
typedef void (*hm_log_fn)(const char* json_line, void* user);

HM_API const char* hm_version(void);
HM_API const char* hm_last_error(void);
HM_API const char* hm_status_name(hm_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
HM_API void hm_string_free(char* text);

/* ---- run configuration --------------------------------------------------
 * config_json is a JSON object with optional sections generator,
 * discriminator, training, classifier, segmentation, masking and cse. NULL or
 * "" means all defaults. */

/* Validates a configuration and returns it with every default filled in. */
HM_API hm_status hm_config_resolve(const char* config_json, char** resolved_json);

/* ---- datasets ------------------------------------------------------------ */

/* Manifest JSON file, raw-tensor file, or png-dir root. */
HM_API hm_status hm_dataset_load(const char* path, hm_dataset** out);
/* spec_json keys: classes, per_class, size, channels, parts, noise,
 * shared_parts, seed. Different split names give independent draws. */
HM_API hm_status hm_dataset_synthetic(const char* spec_json, const char* split, hm_dataset** out);
HM_API hm_status hm_dataset_subsample(const hm_dataset* data, size_t per_class, uint64_t seed,
                                      hm_dataset** out);
HM_API hm_status hm_dataset_save_raw(const hm_dataset* data, const char* path);
HM_API hm_status hm_dataset_save_png_dir(const hm_dataset* data, const char* root);
/* {"size", "channels", "height", "width", "class_names", "class_counts"} */
HM_API hm_status hm_dataset_info(const hm_dataset* data, char** info_json);
HM_API void hm_dataset_free(hm_dataset* data);

/* ---- segmentation -------------------------------------------------------- */

/* Segments every image and writes a segmentation bundle plus its JSON sidecar.
 * summary_json (optional) receives the parameters and segment counts. */
HM_API hm_status hm_segment(const hm_dataset* data, const char* config_json, const char* out_path,
                            char** summary_json);

/* ---- generator ----------------------------------------------------------- */

/* Trains (or, with resume_path, continues) the mixing generator. segments_path
 * may be NULL to segment in-process. Intermediate checkpoints go to
 * "<checkpoint_out>.step<N>" when training.checkpoint_every > 0. */
HM_API hm_status hm_train_generator(const hm_dataset* data, const char* segments_path,
                                    const char* config_json, uint64_t seed, const char* resume_path,
                                    const char* checkpoint_out, hm_log_fn log, void* user);
HM_API hm_status hm_generator_load(const char* checkpoint_path, hm_generator** out);
HM_API void hm_generator_free(hm_generator* generator);

/* Writes per_class mixed images per class as out_dir/<class>_<idx>.png and
 * returns the written file names as a JSON array. */
HM_API hm_status hm_generate(const hm_generator* generator, const hm_dataset* data,
                             const char* segments_path, const char* config_json, uint64_t seed,
                             size_t per_class, const char* out_dir, char** files_json);

/* ---- classifier ---------------------------------------------------------- */

/* Trains one classifier. generator is required for augment "hydramix" and
 * ignored otherwise; segments_path may be NULL to segment in-process.
 * model_out may be NULL. summary_json receives generated/original step counts. */
HM_API hm_status hm_train_classifier(const hm_dataset* train, const char* segments_path,
                                     const hm_generator* generator, const char* config_json,
                                     uint64_t seed, const char* model_out, hm_log_fn log, void* user,
                                     hm_classifier** model, char** summary_json);
HM_API hm_status hm_classifier_load(const char* path, hm_classifier** out);
HM_API hm_status hm_classifier_save(const hm_classifier* model, const char* path);
/* {"accuracy", "correct", "total", "per_class"} */
HM_API hm_status hm_evaluate(const hm_classifier* model, const hm_dataset* test, char** result_json);
HM_API void hm_classifier_free(hm_classifier* model);

/* ---- metrics and utilities ---------------------------------------------- */

/* class_images_path: JSON object mapping class synset id to image ids. */
HM_API hm_status hm_cse(const char* class_images_path, const char* synsets_path,
                        const char* embeddings_path, double tau, char** result_json, char** result_csv);

/* Runs the finite-difference gradient suite. Report:
 * {"passed", "seconds", "checks": [{"name", "max_rel_error", "tolerance", "coordinates", "skipped", "passed"}]} */
HM_API hm_status hm_gradcheck(uint64_t seed, char** report_json);

/* Converts JSON-lines logs or result files to CSV. */
HM_API hm_status hm_plotdata(const char* const* paths, size_t count, char** csv);

#ifdef __cplusplus
}
#endif

#endif
