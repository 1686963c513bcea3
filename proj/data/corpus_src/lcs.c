int lcs_length(const char *a, int n, const char *b, int m, int *dp) {
  for (int j = 0; j <= m; ++j) dp[j] = 0;
  for (int i = 1; i <= n; ++i) {
    int prev = 0;
    for (int j = 1; j <= m; ++j) {
      int tmp = dp[j];
      if (a[i - 1] == b[j - 1]) dp[j] = prev + 1;
      else if (dp[j - 1] > dp[j]) dp[j] = dp[j - 1];
      prev = tmp;
    }
  }
  return dp[m];
}
