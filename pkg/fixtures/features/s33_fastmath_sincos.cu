__global__ void rotate(const float* angle, float* x, float* y, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) {
        float c = __cosf(angle[i]);
        float s = __sinf(angle[i]);
        float nx = x[i] * c - y[i] * s;
        y[i] = x[i] * s + y[i] * c;
        x[i] = nx;
    }
}
