__constant__ float weights[128];

__global__ void conv1d(const float* __restrict__ in, float* __restrict__ out, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i >= n) return;
    float acc = 0.0f;
    for (int k = 0; k < 128; ++k) {
        acc += weights[k] * in[i + k];
    }
    out[i] = acc;
}
