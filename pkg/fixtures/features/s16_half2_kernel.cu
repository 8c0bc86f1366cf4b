#include <cuda_fp16.h>

__global__ void half2_add(const half2* a, const half2* b, half2* c, int n2) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n2) {
        c[i] = __hadd2(a[i], b[i]);
    }
}
