#ifndef IDENTIK_H
#define IDENTIK_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result codes. Zero is success.
 */
typedef enum IdentikStatus {
  IDENTIK_STATUS_OK = 0,
  IDENTIK_STATUS_NULL_ARGUMENT = 1,
  IDENTIK_STATUS_INVALID_UTF8 = 2,
  IDENTIK_STATUS_IO = 3,
  /*
   Malformed or inconsistent input files.
   */
  IDENTIK_STATUS_DATA_ERROR = 4,
  IDENTIK_STATUS_INVALID_ARGUMENT = 5,
  /*
   Not enough identities or samples for the request.
   */
  IDENTIK_STATUS_INSUFFICIENT = 6,
  /*
   The metric is undefined for this input (empty, degenerate, unachievable).
   */
  IDENTIK_STATUS_METRIC_UNDEFINED = 7,
  IDENTIK_STATUS_OUT_OF_RANGE = 8,
  IDENTIK_STATUS_INTERNAL = 99,
} IdentikStatus;

/*
 Manifest records plus their embeddings.
 */
typedef struct IdentikDataset IdentikDataset;

/*
 Rank-one search results, one per probe, sorted by probe image id.
 */
typedef struct IdentikResults IdentikResults;

/*
 A probe / gallery partition of a dataset.
 */
typedef struct IdentikSplit IdentikSplit;

/*
 Scores of one probe. `has_*` is false when the score is absent.
 */
typedef struct IdentikScorePair {
  double mated;
  double nonmated;
  bool has_mated;
  bool has_nonmated;
} IdentikScorePair;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *identik_version(void);

/*
 Message of the last failure on this thread; empty if none. The pointer is
 valid until the next failing call on this thread.
 */
const char *identik_last_error_message(void);

/*
 Reads and validates a manifest and embedding file.
 */
enum IdentikStatus identik_dataset_open(const char *manifest_path,
                                        const char *embeddings_path,
                                        struct IdentikDataset **out);

void identik_dataset_free(struct IdentikDataset *dataset);

size_t identik_dataset_image_count(const struct IdentikDataset *dataset);

/*
 Every subject's most recent image is its probe; the rest are enrolled.
 */
enum IdentikStatus identik_split_full(const struct IdentikDataset *dataset,
                                      struct IdentikSplit **out);

/*
 Equal identities and enrolled images per demographic group.
 */
enum IdentikStatus identik_split_balanced(const struct IdentikDataset *dataset,
                                          size_t identities_per_group,
                                          size_t enrolled_per_identity,
                                          uint64_t seed,
                                          struct IdentikSplit **out);

void identik_split_free(struct IdentikSplit *split);

size_t identik_split_probe_count(const struct IdentikSplit *split);

size_t identik_split_gallery_count(const struct IdentikSplit *split);

/*
 Exact rank-one search. `workers` = 0 uses all cores.
 */
enum IdentikStatus identik_rank_one(const struct IdentikDataset *dataset,
                                    const struct IdentikSplit *split,
                                    size_t workers,
                                    struct IdentikResults **out);

void identik_results_free(struct IdentikResults *results);

size_t identik_results_len(const struct IdentikResults *results);

enum IdentikStatus identik_results_scores(const struct IdentikResults *results,
                                          size_t index,
                                          struct IdentikScorePair *out);

/*
 Per-group metric report as JSON. Free the string with [`identik_string_free`].
 */
enum IdentikStatus identik_results_report_json(const struct IdentikResults *results,
                                               const char *race,
                                               const char *gender,
                                               double tail_mass,
                                               char **out);

void identik_string_free(char *s);

/*
 d′ between two score samples.
 */
enum IdentikStatus identik_d_prime(const double *a,
                                   size_t a_len,
                                   const double *b,
                                   size_t b_len,
                                   double *out);

/*
 Nearest-rank quantile.
 */
enum IdentikStatus identik_quantile(const double *scores, size_t len, double q, double *out);

/*
 Mated low-tail quantile minus non-mated high-tail quantile.
 */
enum IdentikStatus identik_delta_tail(const double *mated,
                                      size_t mated_len,
                                      const double *nonmated,
                                      size_t nonmated_len,
                                      double tail_mass,
                                      double *out);

/*
 Smallest observed impostor score whose false match rate is at most `target_fmr`.
 */
enum IdentikStatus identik_threshold_for_fmr(const double *impostor,
                                             size_t len,
                                             double target_fmr,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDENTIK_H */
