#include <mma.h>
using namespace nvcuda;

__global__ void wmma_gemm(const half* a, const half* b, float* c, int n) {
    wmma::fragment<wmma::matrix_a, 16, 16, 16, half, wmma::row_major> fa;
    wmma::fragment<wmma::matrix_b, 16, 16, 16, half, wmma::col_major> fb;
    wmma::fragment<wmma::accumulator, 16, 16, 16, float> facc;
    wmma::fill_fragment(facc, 0.0f);
    for (int k = 0; k < n; k += 16) {
        wmma::load_matrix_sync(fa, a + k, n);
        wmma::load_matrix_sync(fb, b + k * n, n);
        wmma::mma_sync(facc, fa, fb, facc);
    }
    wmma::store_matrix_sync(c, facc, n, wmma::mem_row_major);
}
