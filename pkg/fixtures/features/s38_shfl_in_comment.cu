// A __shfl_down_sync ladder was measured slower here.
/* Keeping the __constant__ table idea on ice as well. */
__global__ void plain_scale(const float* in, float* out, float s, int n) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) out[i] = s * in[i];
}
