#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "paraprod.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        PpStatus s_ = (call);                                              \
        if (s_ != PP_STATUS_OK) {                                          \
            char msg_[256];                                                \
            pp_last_error_message(msg_, sizeof msg_);                      \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, msg_);  \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    /* phi = r_1 as a scalar function at n = 1. */
    double values[4] = {1.0, 0.0, -1.0, 0.0};
    PpFunction *phi = NULL;
    CHECK(pp_function_new(1, 1, values, &phi));

    double bmo = 0.0;
    CHECK(pp_norm(phi, PP_NORM_KIND_BMO_M, 0.0, &bmo));

    PpOperator *op = NULL;
    CHECK(pp_operator_new(PP_OPERATOR_KIND_HAAR_MULTIPLIER, phi, &op));
    double norm = 0.0;
    size_t iterations = 0;
    CHECK(pp_operator_norm_2(op, 1e-10, 1000, 0, &norm, &iterations));

    double h = 0.0, th = 0.0;
    CHECK(pp_hilbert_norms(2, &h, &th));

    /* Error path: null output pointer. */
    PpStatus bad = pp_norm(phi, PP_NORM_KIND_BMO_M, 0.0, NULL);
    size_t len = pp_last_error_message(NULL, 0);

    printf("version=%s bmo=%.12f norm=%.12f h=%.12f th=%.12f bad=%d len=%zu\n", pp_version(), bmo, norm, h, th,
           (int)bad, len);
    pp_operator_free(op);
    pp_function_free(phi);
    return fabs(norm / bmo - 1.0) < 1e-8 && bad == PP_STATUS_NULL_POINTER && len > 1 ? 0 : 2;
}
