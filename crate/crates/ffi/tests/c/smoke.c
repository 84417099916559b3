#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "hsketch.h"

#define N 128

static int tridiag(void *user, const double *x, size_t n, size_t cols, double *y) {
    (void)user;
    for (size_t j = 0; j < cols; j++) {
        const double *xj = x + j * n;
        double *yj = y + j * n;
        for (size_t i = 0; i < n; i++) {
            yj[i] = 2.0 * xj[i];
            if (i > 0) yj[i] -= xj[i - 1];
            if (i + 1 < n) yj[i] -= xj[i + 1];
        }
    }
    return 0;
}

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    HsOracle *oracle = NULL;
    if (hs_oracle_callback(N, tridiag, tridiag, NULL, &oracle) != HS_STATUS_OK) return 10;

    HsMatrix *m = NULL;
    if (hs_compress(oracle, 16, HS_FORMAT_HBS_ID, 8, 1e-10, 3, &m) != HS_STATUS_OK) return 11;
    if (hs_matrix_dim(m) != N || hs_matrix_max_rank(m) > 2) return 12;

    double x[N], y[N], z[N];
    for (int i = 0; i < N; i++) x[i] = sin(0.3 * i);
    tridiag(NULL, x, N, 1, z);
    if (hs_matrix_apply(m, x, 1, 0, y) != HS_STATUS_OK) return 13;
    for (int i = 0; i < N; i++)
        if (fabs(y[i] - z[i]) > 1e-10) return 14;

    if (hs_matrix_save(m, argv[1]) != HS_STATUS_OK) return 15;
    HsMatrix *back = NULL;
    if (hs_matrix_load(argv[1], &back) != HS_STATUS_OK) return 16;
    if (hs_matrix_apply(back, x, 1, 1, z) != HS_STATUS_OK) return 17;
    int valid = 0;
    if (hs_matrix_validate(back, &valid) != HS_STATUS_OK || !valid) return 18;

    if (hs_matrix_apply(back, NULL, 1, 0, y) != HS_STATUS_NULL_POINTER) return 19;
    char msg[64];
    if (hs_last_error(msg, sizeof msg) == 0) return 20;

    hs_matrix_free(back);
    hs_matrix_free(m);
    hs_oracle_free(oracle);
    printf("ok\n");
    return 0;
}
