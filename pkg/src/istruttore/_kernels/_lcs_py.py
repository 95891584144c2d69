"""Pure-Python longest-common-subsequence kernel (row-rolling DP)."""


def lcs_length(a, b):
    """Length of the longest common subsequence of two int sequences."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b, n, m = b, a, m, n
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = cur[j - 1]
                cur[j] = up if up >= left else left
        prev = cur
    return prev[m]
