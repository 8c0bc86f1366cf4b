__global__ void stage_scale(const float* in, float* mid, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) mid[i] = in[i] * 2.0f;
}

__global__ void stage_shift(const float* mid, float* mid2, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) mid2[i] = mid[i] + 1.0f;
}

__global__ void stage_clamp(const float* mid2, float* out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) out[i] = mid2[i] < 0.0f ? 0.0f : mid2[i];
}
