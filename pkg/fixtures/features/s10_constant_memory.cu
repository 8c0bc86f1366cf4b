__constant__ float coeffs[64];

__global__ void filter(const float* in, float* out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i >= n) return;
    float acc = 0.0f;
    for (int k = 0; k < 64; ++k) {
        acc += coeffs[k] * in[i + k];
    }
    out[i] = acc;
}
