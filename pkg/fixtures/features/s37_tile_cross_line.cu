__global__ void blur(const float* in, float* out, int w, int h) {
    __shared__ float patch
        [18][18];
    int x = blockIdx.x * 16 + threadIdx.x;
    int y = blockIdx.y * 16 + threadIdx.y;
    patch[threadIdx.y + 1][threadIdx.x + 1] = in[y * w + x];
    __syncthreads();
    out[y * w + x] = 0.2f * (patch[threadIdx.y + 1][threadIdx.x + 1] +
                             patch[threadIdx.y][threadIdx.x + 1] +
                             patch[threadIdx.y + 2][threadIdx.x + 1] +
                             patch[threadIdx.y + 1][threadIdx.x] +
                             patch[threadIdx.y + 1][threadIdx.x + 2]);
}
