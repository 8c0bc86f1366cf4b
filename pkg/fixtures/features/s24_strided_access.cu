// Column-major traversal of a row-major matrix.
// HINT(memory_access_pattern=strided)
__global__ void column_sum(const float* m, float* out, int rows, int cols) {
    int col = blockIdx.x * blockDim.x + threadIdx.x;
    if (col >= cols) return;
    float acc = 0.0f;
    for (int r = 0; r < rows; ++r) {
        acc += m[r * cols + col];
    }
    out[col] = acc;
}
