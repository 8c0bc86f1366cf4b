// HINT(reduction_pattern_present=true)
__global__ void reduce_sum(const float* in, float* out, int n) {
    extern __shared__ float scratch[];
    int tid = threadIdx.x;
    int i = blockIdx.x * blockDim.x + tid;
    scratch[tid] = (i < n) ? in[i] : 0.0f;
    __syncthreads();
    for (int stride = blockDim.x / 2; stride >= 32; stride /= 2) {
        if (tid < stride) scratch[tid] += scratch[tid + stride];
        __syncthreads();
    }
    float v = scratch[tid];
    for (int offset = 16; offset > 0; offset /= 2) {
        v += __shfl_down_sync(0xffffffff, v, offset);
    }
    if (tid == 0) out[blockIdx.x] = v;
}
