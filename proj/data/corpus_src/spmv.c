void spmv_csr(int rows, const int *rowptr, const int *col, const double *val, const double *x,
              double *y) {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = rowptr[r]; k < rowptr[r + 1]; ++k) s += val[k] * x[col[k]];
    y[r] = s;
  }
}
