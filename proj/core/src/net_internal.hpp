#ifndef CMDIS_NET_INTERNAL_HPP
#define CMDIS_NET_INTERNAL_HPP

#include <Eigen/Dense>

#include "cmdis/net.hpp"

// In-library inference helpers shared between the network engine and the
// scorers; Eigen stays out of the public headers.
namespace cmdis {

// Embedding of one prepared input patch (net_input layout).
Eigen::VectorXd patch_feature(const PairScorer& net, const double* input);

// Head logit on two precomputed embeddings.
double head_logit(const PairScorer& net, const Eigen::VectorXd& fa, const Eigen::VectorXd& fb);

}  // namespace cmdis

#endif
