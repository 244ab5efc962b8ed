#include <math.h>
#include <stdio.h>
#include <string.h>

#include "rducb.h"

static int sphere(const double *x, size_t d, void *user_data, double *y) {
    int *calls = user_data;
    double s = 0.0;
    for (size_t i = 0; i < d; i++) s += (x[i] - 0.3) * (x[i] - 0.3);
    *y = s;
    (*calls)++;
    return 0;
}

#define CHECK(expr)                                                         \
    do {                                                                    \
        if ((expr) != RDUCB_STATUS_OK) {                                    \
            fprintf(stderr, "%s failed: %s\n", #expr, rducb_last_error()); \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    RducbDecomposition *g = NULL;
    CHECK(rducb_decomposition_sample(6, 2, 7, &g));
    CHECK(rducb_decomposition_validate(g));
    char *s = NULL;
    CHECK(rducb_decomposition_to_string(g, &s));
    printf("tree %s\n", s);
    rducb_string_free(s);
    rducb_decomposition_free(g);

    RducbBenchmark *b = NULL;
    CHECK(rducb_benchmark_new("stybtang", 3, &b));
    double x[3] = {-2.903534027771177, -2.903534027771177, -2.903534027771177};
    double y = 0.0, opt = 0.0;
    CHECK(rducb_benchmark_eval(b, x, 3, &y));
    CHECK(rducb_benchmark_optimum(b, &opt));
    if (fabs(y - opt) > 1e-9) return 2;
    rducb_benchmark_free(b);

    if (rducb_benchmark_new("nope", 3, &b) != RDUCB_STATUS_INVALID_PARAMETER) return 3;
    if (strstr(rducb_last_error(), "nope") == NULL) return 4;

    RducbRunOptions o;
    CHECK(rducb_run_options_default(&o));
    o.budget = 15;
    o.n_init = 5;
    o.grid_size = 20;
    o.seed = 3;
    int calls = 0;
    double lo[2] = {0.0, 0.0}, hi[2] = {1.0, 1.0};
    RducbTrace *t = NULL;
    CHECK(rducb_run_callback(sphere, &calls, lo, hi, 2, RDUCB_SENSE_MINIMIZE, NULL, &o, &t));
    size_t n = 0;
    CHECK(rducb_trace_len(t, &n));
    if (n != 15 || calls != 15) return 5;
    RducbRound r;
    CHECK(rducb_trace_round(t, n - 1, &r));
    if (!isnan(r.best_regret) || r.is_init) return 6;
    printf("best %g after %zu calls\n", r.best_y, n);
    rducb_trace_free(t);
    return 0;
}
