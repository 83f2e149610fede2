#include <benchmark/benchmark.h>

// Own entry point: the packaged libbenchmark_main.a carries LTO bytecode
// from another compiler release and does not link.
BENCHMARK_MAIN();
