__global__ void worker(float* data, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) data[i] += 1.0f;
}

__global__ void controller(float* data, int n, void* params) {
    if (threadIdx.x == 0) {
        cudaLaunchDevice((void*)worker, params, dim3(4, 1, 1), dim3(64, 1, 1), 0, 0);
    }
}
