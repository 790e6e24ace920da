/*
 * maulab — masked acoustic-unit mispronunciation detection and correction.
 *
 * C interface over the pipeline: create a session, point it at a
 * configuration, then run stages. Every call that can fail returns a
 * maulab_status; the detailed message is kept on the session and stays
 * valid until the next call on that session.
 */
#ifndef MAULAB_H
#define MAULAB_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum maulab_status {
  MAULAB_OK = 0,
  MAULAB_ERR_INVALID_ARGUMENT = 1,
  MAULAB_ERR_CONFIG = 2,
  MAULAB_ERR_IO = 3,
  MAULAB_ERR_DEPENDENCY = 4, /* a required input artifact is missing */
  MAULAB_ERR_CONTRACT = 5,
  MAULAB_ERR_DIVERGED = 6, /* training hit a non-finite loss or gradient */
  MAULAB_ERR_INTERNAL = 7
} maulab_status;

typedef struct maulab_session maulab_session;

const char* maulab_version(void);
const char* maulab_status_name(maulab_status status);

/* Space-separated stage names in pipeline order. */
const char* maulab_stages(void);

/* Sessions start from the "desk" preset. */
maulab_status maulab_session_create(maulab_session** out_session);
void maulab_session_destroy(maulab_session* session);

/* Merge a JSON config file over the current configuration. A "preset" key
 * in the file rebases onto that preset first. */
maulab_status maulab_session_load_config(maulab_session* session, const char* config_path);

/* Set one option. Keys: "preset", "seed", "out_dir", or any dotted parameter
 * path such as "vq.codebook_size" or "detector_train.max_steps". Values are
 * parsed as JSON when possible, otherwise taken as strings. */
maulab_status maulab_session_set(maulab_session* session, const char* key, const char* value);

/* Copy the resolved configuration JSON into the caller's buffer. Returns
 * MAULAB_ERR_INVALID_ARGUMENT if the buffer is too small; *required_size is
 * always set to the full size including the terminating NUL. */
maulab_status maulab_session_config_json(maulab_session* session, char* buffer,
                                         size_t buffer_size, size_t* required_size);

/* Run one pipeline stage: generate, train-vq, encode, train-detector,
 * finetune-corrector, detect, correct, evaluate or report. */
maulab_status maulab_session_run_stage(maulab_session* session, const char* stage);

/* Message for the most recent failure on this session; empty on success. */
const char* maulab_session_last_error(const maulab_session* session);

#ifdef __cplusplus
}
#endif

#endif /* MAULAB_H */
