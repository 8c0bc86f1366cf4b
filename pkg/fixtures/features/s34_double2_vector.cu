__global__ void double2_add(const double2* a, const double2* b, double2* c, int n2) {
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n2) {
        double2 va = a[i];
        double2 vb = b[i];
        c[i] = make_double2(va.x + vb.x, va.y + vb.y);
    }
}
