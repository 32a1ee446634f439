/* Hot loops for _ckernels.pyx. On x86-64 GCC each is built twice (AVX2 and
 * baseline) and picked at load time. No FMA is enabled in either clone, so
 * results stay bitwise equal to the numpy path. */
#ifndef UNCAGE_SIMD_H
#define UNCAGE_SIMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__linux__)
#define UNCAGE_CLONES __attribute__((target_clones("avx512f", "avx2", "default")))
#else
#define UNCAGE_CLONES
#endif

/* Separable blur of one H x W plane with replicate edges. The kernel must be
 * symmetric with odd length K: mirrored taps are summed before weighting,
 * starting from the centre tap and moving outward. Each vertical row lands in
 * pad (W + K - 1 values) and is blurred horizontally while still in cache. */
UNCAGE_CLONES static void uncage_blur_plane(const double *restrict src, double *pad,
                                            double *restrict out, ptrdiff_t H, ptrdiff_t W,
                                            const double *restrict kern, ptrdiff_t K)
{
    ptrdiff_t h = K / 2, i, j, d, r0, r1;
    const double wc = kern[h];
    double *row = pad + h;
    for (i = 0; i < H; i++) {
        const double *restrict c = src + i * W;
        for (j = 0; j < W; j++) row[j] = wc * c[j];
        for (d = 1; d <= h; d++) {
            const double w = kern[h - d];
            r0 = i - d < 0 ? 0 : i - d;
            r1 = i + d >= H ? H - 1 : i + d;
            const double *restrict a = src + r0 * W;
            const double *restrict b = src + r1 * W;
            for (j = 0; j < W; j++) row[j] += w * (a[j] + b[j]);
        }
        for (j = 0; j < h; j++) {
            pad[j] = row[0];
            row[W + j] = row[W - 1];
        }
        double *restrict dst = out + i * W;
        for (j = 0; j < W; j++) dst[j] = wc * row[j];
        for (d = 1; d <= h; d++) {
            const double w = kern[h - d];
            const double *restrict a = row - d;
            const double *restrict b = row + d;
            for (j = 0; j < W; j++) dst[j] += w * (a[j] + b[j]);
        }
    }
}

#define UNCAGE_BLOCK 512

/* best[j] = max over objects o of (min over positives - max over negatives),
 * with an empty negative set counting as 0. Subjects are planes of n values
 * in base; pos/neg are CSR lists per object. mode: 0 contrastive, 1 positive
 * only, 2 negative only. Works in cache-sized blocks. */
UNCAGE_CLONES static void uncage_contrastive(const double *restrict base, ptrdiff_t n, ptrdiff_t n_obj,
                                             const int64_t *restrict pos_ptr, const int64_t *restrict pos_idx,
                                             const int64_t *restrict neg_ptr, const int64_t *restrict neg_idx,
                                             int mode, double *restrict best)
{
    double p[UNCAGE_BLOCK], q[UNCAGE_BLOCK];
    for (ptrdiff_t j0 = 0; j0 < n; j0 += UNCAGE_BLOCK) {
        const ptrdiff_t m = n - j0 < UNCAGE_BLOCK ? n - j0 : UNCAGE_BLOCK;
        double *restrict out = best + j0;
        for (ptrdiff_t j = 0; j < m; j++) out[j] = -__builtin_inf();
        for (ptrdiff_t o = 0; o < n_obj; o++) {
            if (mode != 2) {
                const double *restrict s = base + pos_idx[pos_ptr[o]] * n + j0;
                for (ptrdiff_t j = 0; j < m; j++) p[j] = s[j];
                for (int64_t k = pos_ptr[o] + 1; k < pos_ptr[o + 1]; k++) {
                    s = base + pos_idx[k] * n + j0;
                    for (ptrdiff_t j = 0; j < m; j++) p[j] = s[j] < p[j] ? s[j] : p[j];
                }
            }
            if (mode != 1) {
                if (neg_ptr[o + 1] > neg_ptr[o]) {
                    const double *restrict s = base + neg_idx[neg_ptr[o]] * n + j0;
                    for (ptrdiff_t j = 0; j < m; j++) q[j] = s[j];
                    for (int64_t k = neg_ptr[o] + 1; k < neg_ptr[o + 1]; k++) {
                        s = base + neg_idx[k] * n + j0;
                        for (ptrdiff_t j = 0; j < m; j++) q[j] = s[j] > q[j] ? s[j] : q[j];
                    }
                } else {
                    for (ptrdiff_t j = 0; j < m; j++) q[j] = 0.0;
                }
            }
            double v;
            if (mode == 0) {
                for (ptrdiff_t j = 0; j < m; j++) { v = p[j] - q[j]; out[j] = v > out[j] ? v : out[j]; }
            } else if (mode == 1) {
                for (ptrdiff_t j = 0; j < m; j++) { v = p[j]; out[j] = v > out[j] ? v : out[j]; }
            } else {
                for (ptrdiff_t j = 0; j < m; j++) { v = -q[j]; out[j] = v > out[j] ? v : out[j]; }
            }
        }
    }
}

#endif
