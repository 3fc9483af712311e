#include <catch2/catch.hpp>

#include <cmath>
#include <functional>
#include <map>

#include "hycl/autodiff.hpp"
#include "hycl/hypergraph.hpp"
#include "hycl/rng.hpp"

using namespace hycl;
using Mat = Matrix<double>;
using Val = ad::Value<double>;
using TapeD = ad::Tape<double>;

namespace {

Mat random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = scale * (2.0 * rng.next_double() - 1.0);
  return m;
}

using NamedParams = std::vector<std::pair<std::string, Mat*>>;
using Staged = std::map<std::string, Val>;
using Builder = std::function<Val(TapeD&, Staged&)>;

double eval_loss(const NamedParams& params, const Builder& build) {
  TapeD tape;
  Staged staged;
  for (const auto& [name, m] : params) staged[name] = tape.parameter(*m);
  return build(tape, staged).val()(0, 0);
}

std::map<std::string, Mat> eval_grads(const NamedParams& params, const Builder& build) {
  TapeD tape;
  Staged staged;
  for (const auto& [name, m] : params) staged[name] = tape.parameter(*m);
  Val loss = build(tape, staged);
  tape.backward(loss);
  std::map<std::string, Mat> out;
  for (const auto& [name, m] : params) out[name] = tape.grad_of(staged[name]);
  return out;
}

// Central-difference oracle against the tape's analytic gradients.
double fd_max_rel_err(NamedParams params, const Builder& build, double eps = 1e-6) {
  auto grads = eval_grads(params, build);
  auto report = ad::grad_check(params, [&] { return eval_loss(params, build); }, grads, eps);
  return report.max_rel_err;
}

}  // namespace

TEST_CASE("matmul forward and linear-case gradient", "[autodiff]") {
  // loss = mean(W x) with fixed x: dLoss/dW = x^T broadcast / rows
  Mat w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  Mat x(3, 1);
  x << 1, 2, 3;
  TapeD tape;
  Val wv = tape.parameter(w);
  Val xv = tape.constant(x);
  Val loss = ad::mean_all(ad::matmul(wv, xv));
  REQUIRE(loss.val()(0, 0) == Approx((14.0 + 32.0) / 2.0));
  tape.backward(loss);
  const Mat& g = tape.grad_of(wv);
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 3; ++c) REQUIRE(g(r, c) == Approx(x(c, 0) / 2.0));
}

TEST_CASE("constant subgraphs receive no gradient", "[autodiff]") {
  Mat w = Mat::Ones(2, 2);
  TapeD tape;
  Val wv = tape.parameter(w);
  Val detached = tape.constant(Mat::Ones(2, 2));
  Val loss = ad::mean_all(ad::add(ad::matmul(wv, detached), detached));
  tape.backward(loss);
  REQUIRE_FALSE(tape.grad_live(detached.id));
}

TEST_CASE("backward twice is rejected and non-scalar loss is rejected", "[autodiff]") {
  Mat w = Mat::Ones(2, 2);
  TapeD tape;
  Val wv = tape.parameter(w);
  Val y = ad::scale(wv, 2.0);
  REQUIRE_THROWS_AS(tape.backward(y), ContractError);
  Val loss = ad::mean_all(y);
  tape.backward(loss);
  REQUIRE_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("non-finite values trip the numeric guard", "[autodiff]") {
  Mat bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  TapeD tape;
  REQUIRE_THROWS_AS(tape.constant(bad), NumericError);
}

TEST_CASE("incidence_aggregate mean over a shared hyperedge", "[autodiff]") {
  auto h = Hypergraph::from_edge_lists(2, {{0, 1}});
  auto deg = compute_degrees(h);
  Mat p(2, 1);
  p << 2, 4;
  TapeD tape;
  Val pv = tape.constant(p);
  Val q = ad::incidence_aggregate(pv, h, deg, ad::AggregateDir::NodeToEdge, ad::AggregateNorm::Dest);
  REQUIRE(q.val()(0, 0) == Approx(3.0));
}

TEST_CASE("incidence_aggregate zero-degree rows stay zero", "[autodiff]") {
  Hypergraph h(3, 2, {{0, 0}, {1, 0}});  // hyperedge 1 empty, node 2 isolated
  auto deg = compute_degrees(h);
  Mat p = Mat::Ones(3, 2);
  TapeD tape;
  Val pv = tape.parameter(p);
  Val q = ad::incidence_aggregate(pv, h, deg, ad::AggregateDir::NodeToEdge, ad::AggregateNorm::Dest);
  REQUIRE(q.val().row(1).isZero());
  Val back = ad::incidence_aggregate(q, h, deg, ad::AggregateDir::EdgeToNode, ad::AggregateNorm::Dest);
  REQUIRE(back.val().row(2).isZero());
  Val loss = ad::mean_all(back);
  tape.backward(loss);
  REQUIRE(tape.grad_of(pv).row(2).isZero());
}

TEST_CASE("row_l2_normalize known value", "[autodiff]") {
  Mat x(1, 2);
  x << 3, 4;
  TapeD tape;
  Val y = ad::row_l2_normalize(tape.constant(x));
  REQUIRE(y.val()(0, 0) == Approx(0.6));
  REQUIRE(y.val()(0, 1) == Approx(0.8));
}

TEST_CASE("row_l2_normalize of a zero row stays zero", "[autodiff]") {
  Mat x = Mat::Zero(2, 3);
  x.row(1) << 1, 0, 0;
  TapeD tape;
  Val y = ad::row_l2_normalize(tape.constant(x));
  REQUIRE(y.val().row(0).isZero());
  REQUIRE(y.val()(1, 0) == Approx(1.0));
}

TEST_CASE("row_lse of a uniform row is ln(n)", "[autodiff]") {
  Mat x = Mat::Zero(1, 3);
  TapeD tape;
  Val y = ad::row_lse(tape.constant(x));
  REQUIRE(y.val()(0, 0) == Approx(std::log(3.0)));
}

TEST_CASE("row_lse_subset over all columns matches row_lse bitwise", "[autodiff]") {
  Rng rng(21);
  Mat x = random_mat(6, 9, rng, 3.0);
  TapeD tape;
  Val xv = tape.constant(x);
  Val full = ad::row_lse(xv);
  std::vector<std::vector<Index>> lists(6);
  for (Index r = 0; r < 6; ++r)
    for (Index c = 0; c < 9; ++c) lists[static_cast<std::size_t>(r)].push_back(c);
  Val subset = ad::row_lse_subset(xv, lists);
  for (Index r = 0; r < 6; ++r) REQUIRE(full.val()(r, 0) == subset.val()(r, 0));
}

TEST_CASE("every primitive passes the finite-difference oracle", "[autodiff]") {
  Rng rng(1234);
  Mat a0 = random_mat(4, 5, rng);
  Mat b0 = random_mat(5, 3, rng);
  Mat c0 = random_mat(4, 5, rng);
  Mat bias0 = random_mat(1, 5, rng);
  Mat nt0 = random_mat(6, 5, rng);
  Mat slope0 = Mat::Constant(1, 1, 0.25);
  Mat s0 = random_mat(3, 3, rng);

  SECTION("matmul") {
    NamedParams p{{"a", &a0}, {"b", &b0}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              return ad::mean_all(ad::matmul(s["a"], s["b"]));
            }) < 1e-6);
  }
  SECTION("matmul_nt and transpose") {
    NamedParams p{{"a", &a0}, {"n", &nt0}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              return ad::mean_all(ad::transpose(ad::matmul_nt(s["a"], s["n"])));
            }) < 1e-6);
  }
  SECTION("add, add_rowvec, scale, sub, hadamard") {
    NamedParams p{{"a", &a0}, {"c", &c0}, {"bias", &bias0}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              Val sum = ad::add_rowvec(ad::add(s["a"], ad::scale(s["c"], 1.7)), s["bias"]);
              return ad::mean_all(ad::hadamard(ad::sub(sum, s["c"]), s["a"]));
            }) < 1e-6);
  }
  SECTION("row_scale and row_gather") {
    Vector<double> f(4);
    f << 0.5, 2.0, 0.0, 1.5;
    NamedParams p{{"a", &a0}};
    REQUIRE(fd_max_rel_err(p, [&f](TapeD&, Staged& s) {
              return ad::mean_all(ad::row_gather(ad::row_scale(s["a"], f), {3, 0, 0, 2}));
            }) < 1e-6);
  }
  SECTION("activations away from their kinks") {
    // inputs bounded away from 0 so the central difference never crosses
    Mat act = a0;
    act.array() += act.array().sign() * 0.05;
    NamedParams p{{"x", &act}, {"slope", &slope0}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              Val pre = ad::prelu(s["x"], s["slope"]);
              return ad::mean_all(ad::sigmoid(ad::elu(pre)));
            }) < 1e-5);
  }
  SECTION("exp and log") {
    Mat pos = a0.array().abs().matrix() + Mat::Constant(4, 5, 0.5);
    NamedParams p{{"x", &pos}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              return ad::mean_all(ad::log_elem(ad::exp_elem(s["x"])));
            }) < 1e-6);
  }
  SECTION("row_l2_normalize and row_dot") {
    NamedParams p{{"a", &a0}, {"c", &c0}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              return ad::mean_all(
                  ad::row_dot(ad::row_l2_normalize(s["a"]), ad::row_l2_normalize(s["c"])));
            }) < 1e-6);
  }
  SECTION("row_lse and hstack2") {
    NamedParams p{{"a", &a0}, {"c", &c0}};
    REQUIRE(fd_max_rel_err(p, [](TapeD&, Staged& s) {
              Val l1 = ad::row_lse(s["a"]);
              Val l2 = ad::row_lse(s["c"]);
              return ad::mean_all(ad::row_lse(ad::hstack2(l1, l2)));
            }) < 1e-6);
  }
  SECTION("row_lse_subset") {
    std::vector<std::vector<Index>> lists{{0, 2}, {1}, {0, 1, 2}, {2, 0}};
    Mat small = random_mat(4, 3, rng, 2.0);
    NamedParams p{{"x", &small}};
    REQUIRE(fd_max_rel_err(p, [&lists](TapeD&, Staged& s) {
              return ad::mean_all(ad::row_lse_subset(s["x"], lists));
            }) < 1e-6);
  }
  SECTION("bilinear_pairs") {
    Mat z0 = random_mat(5, 3, rng);
    Mat y0 = random_mat(4, 3, rng);
    NamedParams p{{"z", &z0}, {"s", &s0}, {"y", &y0}};
    std::vector<Index> zi{0, 1, 4, 4};
    std::vector<Index> yi{2, 0, 3, 1};
    REQUIRE(fd_max_rel_err(p, [&](TapeD&, Staged& st) {
              return ad::mean_all(ad::sigmoid(ad::bilinear_pairs(st["z"], st["s"], st["y"], zi, yi)));
            }) < 1e-6);
  }
  SECTION("incidence_aggregate all variants") {
    auto h = Hypergraph(5, 3, {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {3, 1}, {4, 2}}, {1.0, 2.0, 0.5});
    auto deg = compute_degrees(h);
    Mat nodes = random_mat(5, 3, rng);
    Mat edges = random_mat(3, 3, rng);
    for (auto norm : {ad::AggregateNorm::None, ad::AggregateNorm::Dest, ad::AggregateNorm::Source}) {
      NamedParams pn{{"m", &nodes}};
      REQUIRE(fd_max_rel_err(pn, [&](TapeD&, Staged& s) {
                return ad::mean_all(
                    ad::incidence_aggregate(s["m"], h, deg, ad::AggregateDir::NodeToEdge, norm));
              }) < 1e-6);
      NamedParams pe{{"m", &edges}};
      REQUIRE(fd_max_rel_err(pe, [&](TapeD&, Staged& s) {
                return ad::mean_all(
                    ad::incidence_aggregate(s["m"], h, deg, ad::AggregateDir::EdgeToNode, norm));
              }) < 1e-6);
    }
  }
  SECTION("sparse_matmul") {
    Mat dense = random_mat(6, 5, rng);
    for (Index r = 0; r < 6; ++r)
      for (Index c = 0; c < 5; ++c)
        if (rng.next_bernoulli(0.6)) dense(r, c) = 0.0;
    auto sparse = ad::SparseRows<double>::from_dense(dense);
    NamedParams p{{"b", &b0}};
    REQUIRE(fd_max_rel_err(p, [&](TapeD&, Staged& s) {
              return ad::mean_all(ad::sparse_matmul(s["b"], sparse));
            }) < 1e-6);
    // forward agrees with the dense product
    TapeD tape;
    Val bv = tape.constant(b0);
    Val out = ad::sparse_matmul(bv, sparse);
    REQUIRE((out.val() - dense * b0).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("incidence_aggregate matches the dense incidence formula", "[autodiff]") {
  Rng rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = 3 + static_cast<Index>(rng.next_below(47));
    const Index e = 2 + static_cast<Index>(rng.next_below(12));
    std::vector<Membership> pairs;
    std::vector<double> weights;
    for (Index j = 0; j < e; ++j) weights.push_back(0.5 + rng.next_double());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < e; ++j)
        if (rng.next_bernoulli(0.25)) pairs.push_back({i, j});
    Hypergraph h(n, e, std::move(pairs), weights);
    auto deg = compute_degrees(h);

    Mat dense_h = Mat::Zero(n, e);
    for (const auto& m : h.memberships()) dense_h(m.node, m.hyperedge) = 1.0;
    Mat w = Mat::Zero(e, e);
    for (Index j = 0; j < e; ++j) w(j, j) = weights[static_cast<std::size_t>(j)];
    Mat de_inv = Mat::Zero(e, e);
    for (Index j = 0; j < e; ++j) {
      const double d = static_cast<double>(deg.hyperedge_degrees[static_cast<std::size_t>(j)]);
      de_inv(j, j) = d > 0 ? 1.0 / d : 0.0;
    }
    Mat dv_inv = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      dv_inv(i, i) = deg.node_degrees[i] > 0 ? 1.0 / deg.node_degrees[i] : 0.0;

    Mat p = random_mat(n, 4, rng);
    Mat q = random_mat(e, 4, rng);

    TapeD tape;
    Val pv = tape.constant(p);
    Val qv = tape.constant(q);
    Mat got_q = ad::incidence_aggregate(pv, h, deg, ad::AggregateDir::NodeToEdge,
                                        ad::AggregateNorm::Dest)
                    .val();
    Mat want_q = de_inv * dense_h.transpose() * p;
    REQUIRE((got_q - want_q).cwiseAbs().maxCoeff() < 1e-12);

    Mat got_p = ad::incidence_aggregate(qv, h, deg, ad::AggregateDir::EdgeToNode,
                                        ad::AggregateNorm::Dest)
                    .val();
    Mat want_p = dv_inv * dense_h * w * q;
    REQUIRE((got_p - want_p).cwiseAbs().maxCoeff() < 1e-12);
  }
}
