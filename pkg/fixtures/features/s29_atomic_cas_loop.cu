__global__ void lock_update(int* lock, float* value, const float* delta, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i >= n) return;
    while (atomicCAS(lock, 0, 1) != 0) { }
    value[0] += delta[i];
    __threadfence();
    *lock = 0;
}
