#include <stdio.h>
#include <stdlib.h>

#include "oufreq.h"

int main(void) {
    OufreqModel *model = NULL;
    OufreqPath *path = NULL;
    OufreqEstimate est;
    double i0 = 0.0;

    if (oufreq_model_new_reference(0.05, &model) != OUFREQ_STATUS_OK) {
        fprintf(stderr, "model: %s\n", oufreq_last_error());
        return 1;
    }
    oufreq_model_set_seed(model, 7);
    if (oufreq_simulate(model, &path) != OUFREQ_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", oufreq_last_error());
        return 1;
    }
    size_t n = oufreq_path_len(path);
    double *x = malloc(n * sizeof(double));
    if (oufreq_path_copy_x(path, x, n) != OUFREQ_STATUS_OK) {
        return 1;
    }
    if (oufreq_mle(model, path, &est) != OUFREQ_STATUS_OK) {
        fprintf(stderr, "mle: %s\n", oufreq_last_error());
        return 1;
    }
    oufreq_fisher_limit(model, est.theta_hat, &i0);
    printf("points %zu X(T) %.6f theta_hat %.6f se %.3e I0 %.3f converged %d\n",
           n, x[n - 1], est.theta_hat, est.se_hat, i0, est.converged);

    if (oufreq_path_copy_x(path, x, 3) != OUFREQ_STATUS_BUFFER_TOO_SMALL) {
        return 1;
    }
    free(x);
    oufreq_path_free(path);
    oufreq_model_free(model);
    return 0;
}
