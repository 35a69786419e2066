# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernels; see ``_kernels_py`` for the shared contract."""

from libc.math cimport log, log1p, sqrt
from libc.stdlib cimport calloc, free

UNDERFLOW = 1e-300
cdef double _UNDERFLOW = 1e-300


cdef inline void _accumulate(double[::1] acc, double* qx, double* qp, double* qm, int S) noexcept nogil:
    cdef double fi = 0.0
    acc[0] += log(qx[0])
    if S == 3:
        acc[1] += log1p((qx[1] - qx[0]) / qx[0])
        acc[2] += log1p((qx[2] - qx[0]) / qx[0])
        if qp[0] > 0.0:
            fi += (qp[1] - qp[2]) * (qp[1] - qp[2]) / qp[0]
        if qm[0] > 0.0:
            fi += (qm[1] - qm[2]) * (qm[1] - qm[2]) / qm[0]
        acc[3] += fi


def pure_segment(const double[:, :, ::1] VT, const double[::1] g_plus, const double[::1] g_minus,
                 double complex[:, ::1] psi, double[::1] uniforms,
                 unsigned char[::1] outcomes, double[::1] probs, double[::1] acc):
    cdef Py_ssize_t S = VT.shape[0], D = VT.shape[1], n = uniforms.shape[0]
    cdef Py_ssize_t s, i, j, t
    cdef int fail = -1
    cdef bint real_only = True
    cdef double a, b, v, qx[3], qp[3], qm[3], p, inv
    cdef const double* g
    cdef double* xr = <double*> calloc(S * D, sizeof(double))
    cdef double* xi = <double*> calloc(S * D, sizeof(double))
    cdef double* yr = <double*> calloc(S * D, sizeof(double))
    cdef double* yi = <double*> calloc(S * D, sizeof(double))
    cdef const double* row
    if S > 3:
        raise ValueError("at most 3 tracked states")
    if xr == NULL or xi == NULL or yr == NULL or yi == NULL:
        free(xr); free(xi); free(yr); free(yi)
        raise MemoryError()
    for s in range(S):
        for i in range(D):
            xr[s * D + i] = psi[s, i].real
            xi[s * D + i] = psi[s, i].imag
            if psi[s, i].imag != 0.0:
                real_only = False
    with nogil:
        for t in range(n):
            for s in range(S):
                for i in range(D):
                    yr[s * D + i] = 0.0
                    yi[s * D + i] = 0.0
                # y = V x, column by column so the inner loop is a plain axpy
                for j in range(D):
                    row = &VT[s, j, 0]
                    a = xr[s * D + j]
                    for i in range(D):
                        yr[s * D + i] += row[i] * a
                    if not real_only:
                        b = xi[s * D + j]
                        for i in range(D):
                            yi[s * D + i] += row[i] * b
                qp[s] = 0.0
                qm[s] = 0.0
                for i in range(D):
                    v = yr[s * D + i] * yr[s * D + i] + yi[s * D + i] * yi[s * D + i]
                    qp[s] += g_plus[i] * g_plus[i] * v
                    qm[s] += g_minus[i] * g_minus[i] * v
            p = qp[0]
            if p < 0.0:
                p = 0.0
            elif p > 1.0:
                p = 1.0
            probs[t] = p
            if uniforms[t] < p:
                outcomes[t] = 0
                g = &g_plus[0]
                for s in range(S):
                    qx[s] = qp[s]
            else:
                outcomes[t] = 1
                g = &g_minus[0]
                for s in range(S):
                    qx[s] = qm[s]
            for s in range(S):
                if qx[s] < _UNDERFLOW:
                    fail = t
            if fail >= 0:
                break
            for s in range(S):
                inv = 1.0 / sqrt(qx[s])
                for i in range(D):
                    xr[s * D + i] = yr[s * D + i] * g[i] * inv
                    xi[s * D + i] = yi[s * D + i] * g[i] * inv
            _accumulate(acc, qx, qp, qm, S)
    for s in range(S):
        for i in range(D):
            psi[s, i] = xr[s * D + i] + 1j * xi[s * D + i]
    free(xr); free(xi); free(yr); free(yi)
    return fail


def density_segment(const double complex[:, :, ::1] F, const double[:, ::1] G_plus, const double[:, ::1] G_minus,
                    double complex[:, :, ::1] rho, double[::1] uniforms,
                    unsigned char[::1] outcomes, double[::1] probs, double[::1] acc):
    cdef Py_ssize_t S = F.shape[0], D = F.shape[1], n = uniforms.shape[0]
    cdef Py_ssize_t s, i, j, k, t, DD = D * D
    cdef int fail = -1
    cdef double fr, fim, rr, ri, a, b, gv, qx[3], qp[3], qm[3], p, inv
    cdef double* G
    cdef double* Pp = <double*> calloc(DD, sizeof(double))
    cdef double* Pm = <double*> calloc(DD, sizeof(double))
    cdef double* Gp = <double*> calloc(DD, sizeof(double))
    cdef double* Gm = <double*> calloc(DD, sizeof(double))
    cdef double* Fr = <double*> calloc(S * DD, sizeof(double))
    cdef double* Fi = <double*> calloc(S * DD, sizeof(double))
    cdef double* xr = <double*> calloc(S * DD, sizeof(double))
    cdef double* xi = <double*> calloc(S * DD, sizeof(double))
    cdef double* tr = <double*> calloc(DD, sizeof(double))
    cdef double* ti = <double*> calloc(DD, sizeof(double))
    if S > 3:
        raise ValueError("at most 3 tracked states")
    if (Pp == NULL or Pm == NULL or Gp == NULL or Gm == NULL or Fr == NULL or Fi == NULL
            or xr == NULL or xi == NULL or tr == NULL or ti == NULL):
        free(Pp); free(Pm); free(Gp); free(Gm); free(Fr); free(Fi)
        free(xr); free(xi); free(tr); free(ti)
        raise MemoryError()
    for i in range(D):
        for j in range(D):
            Gp[i * D + j] = G_plus[i, j]
            Gm[i * D + j] = G_minus[i, j]
            a = 0.0
            b = 0.0
            for k in range(D):
                a += G_plus[k, i] * G_plus[k, j]
                b += G_minus[k, i] * G_minus[k, j]
            Pp[i * D + j] = a
            Pm[i * D + j] = b
    for s in range(S):
        for i in range(D):
            for j in range(D):
                Fr[s * DD + i * D + j] = F[s, i, j].real
                Fi[s * DD + i * D + j] = F[s, i, j].imag
                xr[s * DD + i * D + j] = rho[s, i, j].real
                xi[s * DD + i * D + j] = rho[s, i, j].imag
    with nogil:
        for t in range(n):
            for s in range(S):
                for k in range(DD):
                    fr = Fr[s * DD + k]
                    fim = Fi[s * DD + k]
                    rr = xr[s * DD + k]
                    ri = xi[s * DD + k]
                    xr[s * DD + k] = fr * rr - fim * ri
                    xi[s * DD + k] = fr * ri + fim * rr
                qp[s] = 0.0
                qm[s] = 0.0
                # P is symmetric, so Tr(P rho) only sees Re(rho)
                for k in range(DD):
                    qp[s] += Pp[k] * xr[s * DD + k]
                    qm[s] += Pm[k] * xr[s * DD + k]
            p = qp[0]
            if p < 0.0:
                p = 0.0
            elif p > 1.0:
                p = 1.0
            probs[t] = p
            if uniforms[t] < p:
                outcomes[t] = 0
                G = Gp
                for s in range(S):
                    qx[s] = qp[s]
            else:
                outcomes[t] = 1
                G = Gm
                for s in range(S):
                    qx[s] = qm[s]
            for s in range(S):
                if qx[s] < _UNDERFLOW:
                    fail = t
            if fail >= 0:
                break
            for s in range(S):
                # T = G rho
                for k in range(DD):
                    tr[k] = 0.0
                    ti[k] = 0.0
                for i in range(D):
                    for j in range(D):
                        gv = G[i * D + j]
                        for k in range(D):
                            tr[i * D + k] += gv * xr[s * DD + j * D + k]
                            ti[i * D + k] += gv * xi[s * DD + j * D + k]
                # rho = T G^T / q, upper triangle then mirrored
                inv = 1.0 / qx[s]
                for i in range(D):
                    for k in range(i, D):
                        a = 0.0
                        b = 0.0
                        for j in range(D):
                            a += tr[i * D + j] * G[k * D + j]
                            b += ti[i * D + j] * G[k * D + j]
                        xr[s * DD + i * D + k] = a * inv
                        xi[s * DD + i * D + k] = b * inv
                    xi[s * DD + i * D + i] = 0.0
                for i in range(D):
                    for k in range(i + 1, D):
                        xr[s * DD + k * D + i] = xr[s * DD + i * D + k]
                        xi[s * DD + k * D + i] = -xi[s * DD + i * D + k]
            _accumulate(acc, qx, qp, qm, S)
    for s in range(S):
        for i in range(D):
            for j in range(D):
                rho[s, i, j] = xr[s * DD + i * D + j] + 1j * xi[s * DD + i * D + j]
    free(Pp); free(Pm); free(Gp); free(Gm); free(Fr); free(Fi)
    free(xr); free(xi); free(tr); free(ti)
    return fail


def block_segment(const double[::1] D_data, const Py_ssize_t[::1] D_indices, const Py_ssize_t[::1] D_indptr,
                  const double complex[:, ::1] F, const double[::1] G_plus, const double[::1] G_minus,
                  const Py_ssize_t[::1] sizes, const Py_ssize_t[::1] offsets,
                  double complex[:, ::1] rho, double[::1] uniforms,
                  unsigned char[::1] outcomes, double[::1] probs, double[::1] acc):
    cdef Py_ssize_t S = F.shape[0], L = F.shape[1], B = sizes.shape[0], n = uniforms.shape[0]
    cdef Py_ssize_t s, b, i, j, k, t, o, d, e, nmax = 0
    cdef int fail = -1
    cdef bint mix = D_data.shape[0] > 0
    cdef double fr, fim, rr, ri, a, c, gv, qx[3], qp[3], qm[3], p, inv
    cdef const double* G
    cdef double* Pp = <double*> calloc(L, sizeof(double))
    cdef double* Pm = <double*> calloc(L, sizeof(double))
    cdef double* xr = <double*> calloc(S * L, sizeof(double))
    cdef double* xi = <double*> calloc(S * L, sizeof(double))
    cdef double* yr = <double*> calloc(L, sizeof(double))
    cdef double* yi = <double*> calloc(L, sizeof(double))
    cdef double* tr
    cdef double* ti
    if S > 3:
        raise ValueError("at most 3 tracked states")
    for b in range(B):
        if sizes[b] > nmax:
            nmax = sizes[b]
    tr = <double*> calloc(nmax * nmax, sizeof(double))
    ti = <double*> calloc(nmax * nmax, sizeof(double))
    if Pp == NULL or Pm == NULL or xr == NULL or xi == NULL or yr == NULL or yi == NULL or tr == NULL or ti == NULL:
        free(Pp); free(Pm); free(xr); free(xi); free(yr); free(yi); free(tr); free(ti)
        raise MemoryError()
    for b in range(B):
        d = sizes[b]
        o = offsets[b]
        for i in range(d):
            for j in range(d):
                a = 0.0
                c = 0.0
                for k in range(d):
                    a += G_plus[o + k * d + i] * G_plus[o + k * d + j]
                    c += G_minus[o + k * d + i] * G_minus[o + k * d + j]
                Pp[o + i * d + j] = a
                Pm[o + i * d + j] = c
    for s in range(S):
        for k in range(L):
            xr[s * L + k] = rho[s, k].real
            xi[s * L + k] = rho[s, k].imag
    with nogil:
        for t in range(n):
            for s in range(S):
                if mix:
                    for k in range(L):
                        a = 0.0
                        c = 0.0
                        for e in range(D_indptr[k], D_indptr[k + 1]):
                            a += D_data[e] * xr[s * L + D_indices[e]]
                            c += D_data[e] * xi[s * L + D_indices[e]]
                        yr[k] = a
                        yi[k] = c
                else:
                    for k in range(L):
                        yr[k] = xr[s * L + k]
                        yi[k] = xi[s * L + k]
                qp[s] = 0.0
                qm[s] = 0.0
                for k in range(L):
                    fr = F[s, k].real
                    fim = F[s, k].imag
                    rr = fr * yr[k] - fim * yi[k]
                    ri = fr * yi[k] + fim * yr[k]
                    xr[s * L + k] = rr
                    xi[s * L + k] = ri
                    qp[s] += Pp[k] * rr
                    qm[s] += Pm[k] * rr
            p = qp[0]
            if p < 0.0:
                p = 0.0
            elif p > 1.0:
                p = 1.0
            probs[t] = p
            if uniforms[t] < p:
                outcomes[t] = 0
                G = &G_plus[0]
                for s in range(S):
                    qx[s] = qp[s]
            else:
                outcomes[t] = 1
                G = &G_minus[0]
                for s in range(S):
                    qx[s] = qm[s]
            for s in range(S):
                if qx[s] < _UNDERFLOW:
                    fail = t
            if fail >= 0:
                break
            for s in range(S):
                inv = 1.0 / qx[s]
                for b in range(B):
                    d = sizes[b]
                    o = offsets[b]
                    for k in range(d * d):
                        tr[k] = 0.0
                        ti[k] = 0.0
                    for i in range(d):
                        for j in range(d):
                            gv = G[o + i * d + j]
                            for k in range(d):
                                tr[i * d + k] += gv * xr[s * L + o + j * d + k]
                                ti[i * d + k] += gv * xi[s * L + o + j * d + k]
                    for i in range(d):
                        for k in range(i, d):
                            a = 0.0
                            c = 0.0
                            for j in range(d):
                                a += tr[i * d + j] * G[o + k * d + j]
                                c += ti[i * d + j] * G[o + k * d + j]
                            xr[s * L + o + i * d + k] = a * inv
                            xi[s * L + o + i * d + k] = c * inv
                        xi[s * L + o + i * d + i] = 0.0
                    for i in range(d):
                        for k in range(i + 1, d):
                            xr[s * L + o + k * d + i] = xr[s * L + o + i * d + k]
                            xi[s * L + o + k * d + i] = -xi[s * L + o + i * d + k]
            _accumulate(acc, qx, qp, qm, S)
    for s in range(S):
        for k in range(L):
            rho[s, k] = xr[s * L + k] + 1j * xi[s * L + k]
    free(Pp); free(Pm); free(xr); free(xi); free(yr); free(yi); free(tr); free(ti)
    return fail
