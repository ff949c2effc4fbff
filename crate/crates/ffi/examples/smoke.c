#include <stdio.h>
#include "recur.h"

int main(void) {
    RecurFrequencies *f = NULL;
    if (recur_frequencies_sqrt_primes(1, &f) != RECUR_STATUS_OK) {
        fprintf(stderr, "%s\n", recur_last_error());
        return 1;
    }
    const char *target[] = {"0"};
    int64_t n = 0;
    RecurStatus s = recur_kronecker_solve(f, target, 1, "0.1", 100000, true, &n);
    printf("status %d, n = %lld\n", (int)s, (long long)n);
    recur_frequencies_free(f);
    return s == RECUR_STATUS_OK && n == 5 ? 0 : 1;
}
