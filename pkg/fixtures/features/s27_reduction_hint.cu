// HINT(reduction_pattern_present=true)
__global__ void norm2(const float* v, float* out, int n) {
    float acc = 0.0f;
    for (int i = blockIdx.x * blockDim.x + threadIdx.x; i < n;
         i += blockDim.x * gridDim.x) {
        acc += v[i] * v[i];
    }
    atomicAdd(out, acc);
}
