// HINT(memory_access_pattern=random)
__global__ void histogram(const int* keys, int* bins, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) {
        atomicAdd(&bins[keys[i]], 1);
    }
}
