// Mirror-symmetric grid world folded by a homomorphism. Left and right swap
// on the mirrored half, so the folded MDP has roughly half the states and its
// optimal policy lifts back without loss.

#include <cstdio>
#include <vector>

#include "grl/homomorphism.hpp"
#include "grl/planners.hpp"

using namespace grl;

namespace {

constexpr std::size_t H = 4, W = 7;
constexpr std::size_t up = 0, down = 1, left = 2, right = 3;
constexpr double slip = 0.1;

std::size_t cell(std::size_t r, std::size_t c) { return r * W + c; }

std::size_t move(std::size_t x, std::size_t a) {
  std::size_t r = x / W, c = x % W;
  if (a == up && r > 0) --r;
  if (a == down && r + 1 < H) ++r;
  if (a == left && c > 0) --c;
  if (a == right && c + 1 < W) ++c;
  return cell(r, c);
}

FiniteMDP grid(double gamma) {
  const std::size_t X = H * W, goal = cell(0, W / 2);
  Tensor3 P(X, Matrix(4, std::vector<double>(X, 0.0)));
  Matrix R(X, std::vector<double>(4, -0.04));
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < 4; ++a) {
      if (x == goal) {
        P[x][a][cell(H - 1, W / 2)] = 1.0;
        R[x][a] = 1.0;
        continue;
      }
      P[x][a][move(x, a)] += 1 - slip;
      // slip sideways, symmetric in the two perpendicular directions
      const bool vertical = a == up || a == down;
      P[x][a][move(x, vertical ? left : up)] += slip / 2;
      P[x][a][move(x, vertical ? right : down)] += slip / 2;
    }
  return make_finite_mdp(P, R, gamma);
}

Homomorphism mirror() {
  const std::size_t half = W / 2 + 1;
  Homomorphism h;
  h.n_states = H * half;
  h.n_abstract_actions = 4;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const bool flipped = c > W / 2;
      h.state_map.push_back(r * half + (flipped ? W - 1 - c : c));
      h.action_map.push_back(flipped ? std::vector<std::size_t>{up, down, right, left}
                                     : std::vector<std::size_t>{up, down, left, right});
    }
  return h;
}

}  // namespace

int main() {
  const auto m = grid(0.95);
  const auto h = mirror();
  const auto qstar = avi(m, kOracleTheta);
  const auto gap = check_q_homo(m, h, 1e-9, qstar);
  const auto sur = surrogate_from_homo(m, h, HomoDispersion::uniform(h));
  const auto qs = avi(sur.mdp, kOracleTheta);
  const auto actions = uplift_homo(h, qs);
  const auto v = pe_exact(m, Policy::deterministic(actions, m.n_actions()));

  std::printf("underlying %zu states, folded %zu states\n", m.n_states(), sur.mdp.n_states());
  std::printf("Q* gap across mirrored pairs %.3g\n", gap.worst_gap);
  const char* arrow = "^v<>";
  double loss = 0;
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const std::size_t x = cell(r, c);
      loss = std::max(loss, qstar.max(x) - v[x]);
      std::printf(" %c %6.3f", arrow[actions[x]], v[x]);
    }
    std::printf("\n");
  }
  std::printf("value loss of the lifted policy %.3g\n", loss);
}
