#include <cstdio>

__global__ void log_and_copy(const float* in, float* out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i == 0) printf("no atomicAdd(, no __shfl_sync( here");
    if (i < n) out[i] = in[i];
}
