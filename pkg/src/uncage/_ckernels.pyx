# Compiled versions of the kernels in _pykernels.py; keep operation order identical.
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    CONTRASTIVE = 0
    POSITIVE_ONLY = 1
    NEGATIVE_ONLY = 2


cdef extern from "_simd.h" nogil:
    void uncage_blur_plane(const double* src, double* pad, double* out,
                           Py_ssize_t H, Py_ssize_t W, const double* kern, Py_ssize_t K)
    void uncage_contrastive(const double* base, Py_ssize_t n, Py_ssize_t n_obj,
                            const cnp.int64_t* pos_ptr, const cnp.int64_t* pos_idx,
                            const cnp.int64_t* neg_ptr, const cnp.int64_t* neg_idx,
                            int mode, double* best)


def blur_stack(const double[:, :, ::1] stack, const double[::1] kernel):
    cdef Py_ssize_t S = stack.shape[0], H = stack.shape[1], W = stack.shape[2]
    cdef Py_ssize_t K = kernel.shape[0], s
    out_arr = np.empty((S, H, W), dtype=np.float64)
    pad_arr = np.empty(W + K, dtype=np.float64)
    cdef double* out = <double*> cnp.PyArray_DATA(out_arr)
    cdef double* pad = <double*> cnp.PyArray_DATA(pad_arr)
    if S == 0 or H == 0 or W == 0:
        return np.zeros((S, H, W), dtype=np.float64)
    with nogil:
        for s in range(S):
            uncage_blur_plane(&stack[s, 0, 0], pad, out + s * H * W, H, W, &kernel[0], K)
    return out_arr


cdef const cnp.int64_t* _index_data(cnp.ndarray arr, str name) except NULL:
    if arr.dtype != np.int64 or arr.ndim != 1 or not arr.flags.c_contiguous:
        raise ValueError(f"{name} must be a contiguous 1D int64 array")
    if arr.shape[0] == 0:
        return <const cnp.int64_t*> &_EMPTY_INDEX
    return <const cnp.int64_t*> cnp.PyArray_DATA(arr)


cdef cnp.int64_t _EMPTY_INDEX = 0


def contrastive(cnp.ndarray stack, cnp.ndarray pos_ptr_arr, cnp.ndarray pos_idx_arr,
                cnp.ndarray neg_ptr_arr, cnp.ndarray neg_idx_arr, int mode):
    # plain ndarray arguments: typed memoryview setup dominated the runtime at grid sizes used here
    if stack.dtype != np.float64 or stack.ndim != 3 or not stack.flags.c_contiguous:
        raise ValueError("stack must be a C-contiguous (S, H, W) float64 array")
    cdef Py_ssize_t H = stack.shape[1], W = stack.shape[2], HW = H * W
    cdef Py_ssize_t n_obj = pos_ptr_arr.shape[0] - 1
    cdef const cnp.int64_t* pos_ptr = _index_data(pos_ptr_arr, "pos_ptr")
    cdef const cnp.int64_t* pos_idx = _index_data(pos_idx_arr, "pos_idx")
    cdef const cnp.int64_t* neg_ptr = _index_data(neg_ptr_arr, "neg_ptr")
    cdef const cnp.int64_t* neg_idx = _index_data(neg_idx_arr, "neg_idx")
    if HW == 0 or n_obj <= 0:
        return np.full((H, W), -np.inf)
    best_arr = np.empty((H, W))
    cdef double* best = <double*> cnp.PyArray_DATA(best_arr)
    cdef const double* base = <const double*> cnp.PyArray_DATA(stack)
    with nogil:
        uncage_contrastive(base, HW, n_obj, pos_ptr, pos_idx, neg_ptr, neg_idx, mode, best)
    return best_arr
    p_arr = np.empty(HW)
    n_arr = np.empty(HW)
    cdef double* best = <double*> cnp.PyArray_DATA(best_arr)
    cdef double* p = <double*> cnp.PyArray_DATA(p_arr)
    cdef double* n = <double*> cnp.PyArray_DATA(n_arr)
    cdef const double* base = <const double*> cnp.PyArray_DATA(stack)
    with nogil:
        for o in range(n_obj):
            # plane sweeps: min over positives, max over negatives
            if mode != NEGATIVE_ONLY:
                memcpy(p, base + pos_idx[pos_ptr[o]] * HW, HW * sizeof(double))
                for q in range(pos_ptr[o] + 1, pos_ptr[o + 1]):
                    uncage_min_into(p, base + pos_idx[q] * HW, HW)
            if mode != POSITIVE_ONLY:
                if neg_ptr[o + 1] > neg_ptr[o]:
                    memcpy(n, base + neg_idx[neg_ptr[o]] * HW, HW * sizeof(double))
                    for q in range(neg_ptr[o] + 1, neg_ptr[o + 1]):
                        uncage_max_into(n, base + neg_idx[q] * HW, HW)
                else:
                    memset(n, 0, HW * sizeof(double))
            if mode == CONTRASTIVE:
                uncage_best_diff(best, p, n, HW)
            elif mode == POSITIVE_ONLY:
                uncage_best_diff(best, p, NULL, HW)
            else:
                uncage_best_diff(best, NULL, n, HW)
    return best_arr


def neighbor_votes(cnp.int64_t[:, ::1] tokens, cnp.npy_bool[:, ::1] committed, int vocab, int radius):
    cdef Py_ssize_t H = tokens.shape[0], W = tokens.shape[1]
    cdef Py_ssize_t i, j, a, b, lo_a, hi_a, lo_b, hi_b
    cdef cnp.int64_t v
    out_arr = np.zeros((H, W, vocab), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] out = out_arr
    for i in range(H):
        for j in range(W):
            if not committed[i, j]:
                continue
            v = tokens[i, j]
            lo_a = i - radius if i >= radius else 0
            hi_a = i + radius + 1 if i + radius + 1 <= H else H
            lo_b = j - radius if j >= radius else 0
            hi_b = j + radius + 1 if j + radius + 1 <= W else W
            for a in range(lo_a, hi_a):
                for b in range(lo_b, hi_b):
                    out[a, b, v] += 1
            out[i, j, v] -= 1
    return out_arr


cdef inline void _radical(cnp.int64_t index, cnp.int64_t base, cnp.int64_t* num, cnp.int64_t* den):
    num[0] = 0
    den[0] = 1
    while index > 0:
        num[0] = num[0] * base + index % base
        den[0] *= base
        index //= base


def halton_order(Py_ssize_t height, Py_ssize_t width, cnp.int64_t max_draws):
    cdef Py_ssize_t total = height * width, n = 0
    cdef cnp.int64_t i = 0, xn, xd, yn, yd, row, col
    seen_arr = np.zeros((height, width), dtype=np.uint8)
    order_arr = np.empty((total, 2), dtype=np.int64)
    cdef unsigned char[:, ::1] seen = seen_arr
    cdef cnp.int64_t[:, ::1] order = order_arr
    while n < total:
        i += 1
        if i > max_draws:
            raise RuntimeError(f"Halton order incomplete after {max_draws} draws")
        _radical(i, 2, &xn, &xd)
        _radical(i, 3, &yn, &yd)
        row = yn * height // yd
        col = xn * width // xd
        if not seen[row, col]:
            seen[row, col] = 1
            order[n, 0] = row
            order[n, 1] = col
            n += 1
    return order_arr
