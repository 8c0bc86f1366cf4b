// HINT(reduction_pattern_present=true)
__global__ void warp_max(const float* in, float* out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    float v = (i < n) ? in[i] : -1e30f;
    for (int offset = 16; offset > 0; offset /= 2) {
        float peer = __shfl_xor_sync(0xffffffff, v, offset);
        v = v > peer ? v : peer;
    }
    if ((threadIdx.x & 31) == 0) out[i / 32] = v;
}
