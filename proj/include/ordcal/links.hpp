#pragma once

#include <algorithm>
#include <cmath>

namespace ordcal {

// Link structure of the K-1 equations of a vector GLM.
//   multinomial   eta_j = log(P(j+1)/P(0))
//   cumulative    eta_j = logit P(Y > j)
//   adjacent      eta_j = log(P(j+1)/P(j))
//   continuation  eta_j = logit P(Y > j | Y >= j)
// Categories are 0-based here, equations j = 0..K-2.
enum class Link { multinomial, cumulative, adjacent, continuation };

namespace link {

template <typename Scalar>
inline Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

// log(1 + exp(x)) without overflow.
template <typename Scalar>
inline Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  if (x > Scalar(0)) return x + log1p(exp(-x));
  return log1p(exp(x));
}

template <typename Scalar>
inline Scalar logit(Scalar p) {
  using std::log;
  return log(p / (Scalar(1) - p));
}

// Category probabilities p[0..K-1] from eta[0..K-2].
template <typename Scalar>
void probabilities(Link link, const Scalar* eta, int K, Scalar* p) {
  using std::exp;
  const int m = K - 1;
  switch (link) {
    case Link::multinomial: {
      Scalar mx(0);
      for (int j = 0; j < m; ++j) mx = std::max(mx, eta[j]);
      p[0] = exp(-mx);
      Scalar s = p[0];
      for (int j = 0; j < m; ++j) s += (p[j + 1] = exp(eta[j] - mx));
      for (int c = 0; c < K; ++c) p[c] /= s;
      break;
    }
    case Link::adjacent: {
      p[0] = Scalar(0);
      Scalar mx(0);
      for (int j = 0; j < m; ++j) mx = std::max(mx, p[j + 1] = p[j] + eta[j]);
      Scalar s(0);
      for (int c = 0; c < K; ++c) s += (p[c] = exp(p[c] - mx));
      for (int c = 0; c < K; ++c) p[c] /= s;
      break;
    }
    case Link::continuation: {
      Scalar log_ge(0);
      for (int j = 0; j < m; ++j) {
        p[j] = exp(log_ge - softplus(eta[j]));
        log_ge -= softplus(-eta[j]);
      }
      p[m] = exp(log_ge);
      break;
    }
    case Link::cumulative: {
      p[0] = sigmoid(-eta[0]);
      for (int c = 1; c < m; ++c) {
        if (eta[c - 1] + eta[c] > Scalar(0))
          p[c] = sigmoid(-eta[c]) - sigmoid(-eta[c - 1]);
        else
          p[c] = sigmoid(eta[c - 1]) - sigmoid(eta[c]);
      }
      p[m] = sigmoid(eta[m - 1]);
      break;
    }
  }
}

// Probabilities plus g[c*m + j] = d log p_c / d eta_j for every category c.
// Cells with p_c <= 0 (crossing cumulative equations) get zero derivatives.
template <typename Scalar>
void derivatives(Link link, const Scalar* eta, int K, Scalar* p, Scalar* g) {
  const int m = K - 1;
  probabilities(link, eta, K, p);
  switch (link) {
    case Link::multinomial:
      for (int c = 0; c < K; ++c)
        for (int j = 0; j < m; ++j) g[c * m + j] = Scalar(c == j + 1) - p[j + 1];
      break;
    case Link::adjacent: {
      Scalar tail(0);
      for (int j = m - 1; j >= 0; --j) {
        tail += p[j + 1];
        for (int c = 0; c < K; ++c) g[c * m + j] = Scalar(j < c) - tail;
      }
      break;
    }
    case Link::continuation:
      for (int j = 0; j < m; ++j) {
        const Scalar nu = sigmoid(eta[j]);
        for (int c = 0; c < K; ++c)
          g[c * m + j] = j < c ? Scalar(1) - nu : (j == c ? -nu : Scalar(0));
      }
      break;
    case Link::cumulative: {
      std::fill(g, g + K * m, Scalar(0));
      g[0] = -sigmoid(eta[0]);
      g[m * m + m - 1] = sigmoid(-eta[m - 1]);
      for (int c = 1; c < m; ++c) {
        if (!(p[c] > Scalar(0))) continue;
        const Scalar a = sigmoid(eta[c - 1]), b = sigmoid(eta[c]);
        g[c * m + c - 1] = a * (Scalar(1) - a) / p[c];
        g[c * m + c] = -b * (Scalar(1) - b) / p[c];
      }
      break;
    }
  }
}

}  // namespace link
}  // namespace ordcal
