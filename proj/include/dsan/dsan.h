/*
 * C interface to the distance-based self-attention sentence encoder and its
 * NLI pipeline. All functions are thread-compatible: one model handle may be
 * shared by concurrent readers (encode/evaluate/inspect) but training and
 * handle destruction need exclusive access.
 */
#ifndef DSAN_H
#define DSAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(DSAN_BUILDING_SHARED)
#define DSAN_API __declspec(dllexport)
#else
#define DSAN_API __declspec(dllimport)
#endif
#else
#define DSAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsan_status {
  DSAN_OK = 0,
  DSAN_ERR_USAGE = 1,   /* bad arguments or configuration */
  DSAN_ERR_DATA = 2,    /* malformed corpus, embedding, or checkpoint file */
  DSAN_ERR_NUMERIC = 3, /* non-finite value; the run was aborted */
  DSAN_ERR_IO = 4,      /* filesystem failure */
} dsan_status;

/* Opaque model handle: encoder + classifier weights, vocabulary, and the
 * frozen embedding table, as stored in a checkpoint. */
typedef struct dsan_model dsan_model;

/* Message describing the most recent failure on the calling thread. */
DSAN_API const char* dsan_last_error(void);

typedef void (*dsan_epoch_callback)(int epoch, double train_loss,
                                    double train_acc, double valid_acc,
                                    double seconds, void* user_data);

typedef struct dsan_train_options {
  double learning_rate; /* 0.001 */
  int batch_size;       /* 64 */
  int heads;            /* 5 */
  double alpha;         /* 1.5; 0 disables the distance mask */
  double dropout;       /* 0.1 */
  int hidden_dim;       /* 300 */
  int epochs;           /* 10 */
  uint64_t seed;        /* 1 */
  double adam_beta1;    /* 0.9 */
  double adam_beta2;    /* 0.999 */
  double adam_eps;      /* 1e-8 */
  /* 0: layer-normalize each projection's output (default reading);
   * 1: normalize projection inputs instead. */
  int normalize_projection_input;
  dsan_epoch_callback on_epoch; /* optional progress hook */
  void* user_data;
} dsan_train_options;

DSAN_API void dsan_train_options_init(dsan_train_options* options);

/* Trains from scratch: builds the vocabulary from both corpora, loads the
 * frozen pre-trained vectors (embedding width fixes the model width), and
 * runs the optimization loop. out_dir receives metrics.csv, config echo, and
 * best.ckpt (selected on validation accuracy). When out_model is non-NULL it
 * receives a handle to the best checkpoint; release with dsan_model_close. */
DSAN_API dsan_status dsan_train(const char* embeddings_path,
                                const char* train_path, const char* valid_path,
                                const char* out_dir,
                                const dsan_train_options* options,
                                dsan_model** out_model);

DSAN_API dsan_status dsan_model_open(const char* checkpoint_path,
                                     dsan_model** out_model);
DSAN_API void dsan_model_close(dsan_model* model);

DSAN_API int dsan_model_embed_dim(const dsan_model* model);
/* Sentence vector width: 4 * embed_dim. */
DSAN_API int dsan_model_vector_dim(const dsan_model* model);
DSAN_API int64_t dsan_model_parameter_count(const dsan_model* model);

/* Encodes one sentence into out[0 .. out_len); out_len must equal
 * dsan_model_vector_dim(model). */
DSAN_API dsan_status dsan_model_encode(const dsan_model* model,
                                       const char* sentence, double* out,
                                       size_t out_len);

/* Accuracy over a JSON-lines corpus; confusion (when non-NULL) receives the
 * 3x3 gold-by-predicted counts in row-major order. */
DSAN_API dsan_status dsan_model_evaluate(const dsan_model* model,
                                         const char* corpus_path,
                                         int batch_size, double* accuracy,
                                         int64_t confusion[9]);

/* Accuracy bucketed by the mean premise/hypothesis token count over the
 * intervals [0,e1), [e1,e2), ..., [ek,inf); writes a CSV table. */
DSAN_API dsan_status dsan_model_evaluate_by_length(
    const dsan_model* model, const char* corpus_path, int batch_size,
    const double* bucket_edges, size_t edge_count, const char* out_csv_path);

#define DSAN_EXPORT_CSV 1
#define DSAN_EXPORT_SVG 2

/* Runs the case-study capture on one sentence and writes the report files
 * under out_dir. alpha_override >= 0 replaces the checkpoint's distance-mask
 * weight for this capture (0 reproduces the no-distance-mask ablation);
 * pass a negative value to keep the stored weight. */
DSAN_API dsan_status dsan_model_inspect(const dsan_model* model,
                                        const char* sentence,
                                        const char* out_dir, int formats,
                                        double alpha_override);

#ifdef __cplusplus
}
#endif

#endif /* DSAN_H */
