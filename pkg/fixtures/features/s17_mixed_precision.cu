#include <cuda_fp16.h>

__global__ void dot_mixed(const half* a, const half* b, float* out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    float acc = 0.0f;
    if (i < n) {
        acc = __half2float(a[i]) * __half2float(b[i]);
        atomicAdd(out, acc);
    }
}
