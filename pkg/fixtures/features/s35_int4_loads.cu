__global__ void pack_shift(const int4* in, int4* out, int n4) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n4) {
        int4 v = in[i];
        v.x <<= 1; v.y <<= 1; v.z <<= 1; v.w <<= 1;
        out[i] = v;
    }
}
