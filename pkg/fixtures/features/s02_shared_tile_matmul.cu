#define TILE 16

__global__ void matmul_tiled(const float* __restrict__ a,
                             const float* __restrict__ b,
                             float* __restrict__ c, int n) {
    __shared__ float ta[TILE][TILE];
    __shared__ float tb[TILE][TILE];
    int row = blockIdx.y * TILE + threadIdx.y;
    int col = blockIdx.x * TILE + threadIdx.x;
    float acc = 0.0f;
    for (int t = 0; t < n / TILE; ++t) {
        ta[threadIdx.y][threadIdx.x] = a[row * n + t * TILE + threadIdx.x];
        tb[threadIdx.y][threadIdx.x] = b[(t * TILE + threadIdx.y) * n + col];
        __syncthreads();
#pragma unroll
        for (int k = 0; k < TILE; ++k) {
            acc += ta[threadIdx.y][k] * tb[k][threadIdx.x];
        }
        __syncthreads();
    }
    c[row * n + col] = acc;
}

void launch_matmul(const float* a, const float* b, float* c, int n) {
    dim3 grid(n / TILE, n / TILE);
    matmul_tiled<<<grid, dim3(16, 16)>>>(a, b, c, n);
}
