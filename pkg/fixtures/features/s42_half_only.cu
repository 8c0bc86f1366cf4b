#include <cuda_fp16.h>

__global__ void relu_half(const __half* in, __half* out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) {
        out[i] = __hgt(in[i], __half(0)) ? in[i] : __half(0);
    }
}
