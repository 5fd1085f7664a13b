#include <klee/klee.h>
#include <stdint.h>
#include <string.h>

extern int32_t buffer_overflow_write(
    unsigned char *buffer, size_t size,
    size_t offset, unsigned char value);
extern int32_t use_after_free_access(
    unsigned char *ptr, size_t size);
extern int32_t double_free_trigger(
    unsigned char *ptr, size_t size);
extern int32_t integer_overflow_allocation(
    size_t base_size, size_t multiplier);

int main() {
    size_t idx1, idx2;
    unsigned char val1;
    unsigned char buffer[128];

    klee_make_symbolic(&idx1, sizeof(idx1), "idx1");
    klee_make_symbolic(&idx2, sizeof(idx2), "idx2");
    klee_make_symbolic(&val1, sizeof(val1), "val1");
    klee_make_symbolic(buffer, sizeof(buffer), "buffer");

    klee_assume(idx1 < 10000);
    klee_assume(idx2 < 10000);

    int path = klee_range(0, 4, "path");

    if (path == 0) {
        buffer_overflow_write(buffer, idx1, idx2, val1);
    } else if (path == 1) {
        use_after_free_access(buffer, idx1);
    } else if (path == 2) {
        double_free_trigger(buffer, idx1);
    } else if (path == 3) {
        integer_overflow_allocation(idx1, idx2);
    }
    return 0;
}
