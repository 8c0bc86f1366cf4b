__global__ void child(float* data, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) data[i] *= 2.0f;
}

__global__ void parent(float* data, int n) {
    if (threadIdx.x == 0) {
        child<<<(n + 255) / 256, 256, 0, cudaStreamTailLaunch>>>(data, n);
    }
}
