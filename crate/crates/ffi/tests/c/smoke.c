#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "srgc.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        SrgcStatus s_ = (call);                                            \
        if (s_ != SRGC_STATUS_OK) {                                        \
            const char *m_ = srgc_last_error_message();                    \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, m_ ? m_ : ""); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    SrgcModel *model = NULL;
    CHECK(srgc_model_random(1, 2, 2, 0.8, 0.5, true, 0.0, 11, &model));

    double gc = -1.0;
    CHECK(srgc_gc_time(model, &gc));
    if (gc != 0.0) {
        fprintf(stderr, "null model has gc %g\n", gc);
        return 1;
    }

    SrgcLaw *law = NULL;
    CHECK(srgc_null_law_time(model, &law));
    size_t len = 0, mult = 0;
    CHECK(srgc_law_dims(law, &len, &mult));
    double *w = malloc(len * sizeof *w);
    CHECK(srgc_law_weights(law, w, len));
    double q = 0.0, c = 0.0;
    CHECK(srgc_law_quantile(law, 0.95, &q));
    CHECK(srgc_law_cdf(law, q, &c));
    if (len != 4 || mult != 1 || fabs(c - 0.95) > 1e-8) {
        fprintf(stderr, "law: len %zu mult %zu cdf %g\n", len, mult, c);
        return 1;
    }

    SrgcSeries *series = NULL;
    CHECK(srgc_simulate(model, 2000, SRGC_DEFAULT_BURN_IN, 5, &series));
    SrgcTestResult r;
    CHECK(srgc_projection_test(series, 1, 2, 0.05, &r));
    if (!(r.p_value >= 0.0 && r.p_value <= 1.0) || r.reject != (r.p_value < 0.05)) {
        fprintf(stderr, "inconsistent test result\n");
        return 1;
    }

    SrgcStatus bad = srgc_gc_band(model, 2.0, 1.0, &gc);
    if (bad != SRGC_STATUS_INVALID_ARGUMENT || srgc_last_error_message() == NULL) {
        fprintf(stderr, "expected invalid argument, got %d\n", (int)bad);
        return 1;
    }

    char *json = NULL;
    CHECK(srgc_model_to_json(model, &json));
    SrgcModel *again = NULL;
    CHECK(srgc_model_from_json(json, &again));
    srgc_string_free(json);

    free(w);
    srgc_series_free(series);
    srgc_law_free(law);
    srgc_model_free(again);
    srgc_model_free(model);
    printf("ok %s\n", srgc_version());
    return 0;
}
