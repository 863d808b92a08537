#include "pedsurv/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "pedsurv/errors.hpp"

namespace pedsurv {

namespace {

size_t table_size(size_t nvars) { return size_t{1} << (2 * nvars); }

int digit(size_t idx, int pos) { return static_cast<int>((idx >> (2 * pos)) & 3); }

// positions of `sub` inside `vars` (both sorted, sub subset of vars)
std::vector<int> positions(const std::vector<int>& vars, const std::vector<int>& sub) {
  std::vector<int> pos(sub.size());
  for (size_t j = 0; j < sub.size(); ++j) {
    auto it = std::lower_bound(vars.begin(), vars.end(), sub[j]);
    pos[j] = static_cast<int>(it - vars.begin());
  }
  return pos;
}

// pot (over vars) *= table (over sub)
void multiply_in(std::vector<double>& pot, const std::vector<int>& vars,
                 const std::vector<double>& table, const std::vector<int>& sub) {
  auto pos = positions(vars, sub);
  for (size_t idx = 0; idx < pot.size(); ++idx) {
    size_t sidx = 0;
    for (size_t j = 0; j < sub.size(); ++j)
      sidx |= size_t(digit(idx, pos[j])) << (2 * j);
    pot[idx] *= table[sidx];
  }
}

// sum pot (over vars) down to keep (sorted subset)
std::vector<double> marginalize(const std::vector<double>& pot,
                                const std::vector<int>& vars,
                                const std::vector<int>& keep) {
  auto pos = positions(vars, keep);
  std::vector<double> out(table_size(keep.size()), 0.0);
  for (size_t idx = 0; idx < pot.size(); ++idx) {
    size_t kidx = 0;
    for (size_t j = 0; j < keep.size(); ++j)
      kidx |= size_t(digit(idx, pos[j])) << (2 * j);
    out[kidx] += pot[idx];
  }
  return out;
}

}  // namespace

bool JunctionTree::running_intersection_ok() const {
  const int nc = static_cast<int>(cliques.size());
  std::vector<std::vector<int>> adj(nc);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (int v = 0; v < n_vars; ++v) {
    std::vector<int> holding;
    for (int c = 0; c < nc; ++c)
      if (std::binary_search(cliques[c].vars.begin(), cliques[c].vars.end(), v))
        holding.push_back(c);
    if (holding.empty()) return false;
    // BFS within the induced subgraph
    std::set<int> hold(holding.begin(), holding.end());
    std::vector<int> stack = {holding[0]};
    std::set<int> seen = {holding[0]};
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      for (int d : adj[c])
        if (hold.count(d) && !seen.count(d)) {
          seen.insert(d);
          stack.push_back(d);
        }
    }
    if (seen.size() != hold.size()) return false;
  }
  return true;
}

JunctionTree build_junction_tree(const Pedigree& p, const GeneticModel& gm) {
  const int n = p.size();
  JunctionTree jt;
  jt.n_vars = n;

  // moral graph: child-father, child-mother, father-mother
  std::vector<std::set<int>> adj(n);
  auto connect = [&](int a, int b) {
    if (a != b) {
      adj[a].insert(b);
      adj[b].insert(a);
    }
  };
  for (int i = 0; i < n; ++i) {
    if (p.is_founder(i)) continue;
    connect(i, p.father_idx[i]);
    connect(i, p.mother_idx[i]);
    connect(p.father_idx[i], p.mother_idx[i]);
  }

  // min-fill elimination, smallest index breaks ties
  std::vector<std::set<int>> work = adj;
  std::vector<bool> eliminated(n, false);
  std::vector<std::vector<int>> elim_cliques;
  std::vector<int> elim_order;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    long best_fill = -1;
    for (int v = 0; v < n; ++v) {
      if (eliminated[v]) continue;
      long fill = 0;
      std::vector<int> nb(work[v].begin(), work[v].end());
      for (size_t a = 0; a < nb.size(); ++a)
        for (size_t b = a + 1; b < nb.size(); ++b)
          if (!work[nb[a]].count(nb[b])) ++fill;
      if (best < 0 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    std::vector<int> clique(work[best].begin(), work[best].end());
    clique.push_back(best);
    std::sort(clique.begin(), clique.end());
    elim_cliques.push_back(clique);
    elim_order.push_back(best);
    std::vector<int> nb(work[best].begin(), work[best].end());
    for (size_t a = 0; a < nb.size(); ++a)
      for (size_t b = a + 1; b < nb.size(); ++b) {
        work[nb[a]].insert(nb[b]);
        work[nb[b]].insert(nb[a]);
      }
    for (int u : nb) work[u].erase(best);
    work[best].clear();
    eliminated[best] = true;
  }

  // keep maximal cliques only
  std::vector<std::vector<int>> maximal;
  for (const auto& c : elim_cliques) {
    bool subset = false;
    for (const auto& d : elim_cliques) {
      if (&c == &d || d.size() <= c.size()) continue;
      if (std::includes(d.begin(), d.end(), c.begin(), c.end())) {
        subset = true;
        break;
      }
    }
    if (!subset) maximal.push_back(c);
  }
  // drop duplicates
  std::sort(maximal.begin(), maximal.end());
  maximal.erase(std::unique(maximal.begin(), maximal.end()), maximal.end());

  for (auto& vars : maximal) {
    Clique c;
    c.vars = vars;
    c.pot.assign(table_size(vars.size()), 1.0);
    jt.cliques.push_back(std::move(c));
  }
  const int nc = static_cast<int>(jt.cliques.size());

  // maximum spanning forest on separator sizes (Kruskal)
  struct Cand { int w, a, b; };
  std::vector<Cand> cands;
  for (int a = 0; a < nc; ++a)
    for (int b = a + 1; b < nc; ++b) {
      std::vector<int> inter;
      std::set_intersection(jt.cliques[a].vars.begin(), jt.cliques[a].vars.end(),
                            jt.cliques[b].vars.begin(), jt.cliques[b].vars.end(),
                            std::back_inserter(inter));
      if (!inter.empty()) cands.push_back({static_cast<int>(inter.size()), a, b});
    }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& x, const Cand& y) { return x.w > y.w; });
  std::vector<int> parent(nc);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& c : cands) {
    int ra = find(c.a), rb = find(c.b);
    if (ra != rb) {
      parent[ra] = rb;
      jt.edges.emplace_back(c.a, c.b);
    }
  }

  // fold structural factors into cliques
  auto containing = [&](const std::vector<int>& scope) {
    int best = -1;
    for (int c = 0; c < nc; ++c) {
      const auto& vars = jt.cliques[c].vars;
      if (std::includes(vars.begin(), vars.end(), scope.begin(), scope.end()))
        if (best < 0 || vars.size() < jt.cliques[best].vars.size()) best = c;
    }
    return best;
  };
  const Geno4 prior = founder_prior(gm);
  for (int i = 0; i < n; ++i) {
    if (p.is_founder(i)) {
      int c = containing({i});
      std::vector<double> t(prior.begin(), prior.end());
      multiply_in(jt.cliques[c].pot, jt.cliques[c].vars, t, {i});
    } else {
      std::vector<int> scope = {i, p.father_idx[i], p.mother_idx[i]};
      std::sort(scope.begin(), scope.end());
      int c = containing(scope);
      std::vector<double> t(table_size(scope.size()));
      for (size_t idx = 0; idx < t.size(); ++idx) {
        int st[3];
        for (int j = 0; j < 3; ++j) st[j] = digit(idx, j);
        int child_st = 0, f_st = 0, m_st = 0;
        for (int j = 0; j < 3; ++j) {
          if (scope[j] == i) child_st = st[j];
          if (scope[j] == p.father_idx[i]) f_st = st[j];
          if (scope[j] == p.mother_idx[i]) m_st = st[j];
        }
        t[idx] = transmission_prob(child_st, f_st, m_st);
      }
      multiply_in(jt.cliques[c].pot, jt.cliques[c].vars, t, scope);
    }
  }
  jt.evidence_clique.resize(n);
  for (int i = 0; i < n; ++i) jt.evidence_clique[i] = containing({i});
  return jt;
}

PosteriorTable propagate(const JunctionTree& jt, const std::vector<Geno4>& ev) {
  const int nc = static_cast<int>(jt.cliques.size());
  const int n = jt.n_vars;
  if (static_cast<int>(ev.size()) != n)
    throw Error("evidence size does not match pedigree size");

  std::vector<std::vector<double>> pot(nc);
  for (int c = 0; c < nc; ++c) pot[c] = jt.cliques[c].pot;
  for (int i = 0; i < n; ++i) {
    int c = jt.evidence_clique[i];
    std::vector<double> t(ev[i].begin(), ev[i].end());
    multiply_in(pot[c], jt.cliques[c].vars, t, {i});
  }

  std::vector<std::vector<int>> adj(nc);
  for (auto [a, b] : jt.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  auto separator = [&](int a, int b) {
    std::vector<int> inter;
    std::set_intersection(jt.cliques[a].vars.begin(), jt.cliques[a].vars.end(),
                          jt.cliques[b].vars.begin(), jt.cliques[b].vars.end(),
                          std::back_inserter(inter));
    return inter;
  };

  double log_evidence = 0.0;
  std::vector<int> par(nc, -2);  // -2 unvisited, -1 root
  std::vector<int> order;        // roots first, children after parents
  for (int root = 0; root < nc; ++root) {
    if (par[root] != -2) continue;
    par[root] = -1;
    std::vector<int> stack = {root};
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      order.push_back(c);
      for (int d : adj[c])
        if (par[d] == -2) {
          par[d] = c;
          stack.push_back(d);
        }
    }
  }

  // inward pass: leaves to roots; messages multiplied into the parent
  std::vector<std::vector<double>> msg_up(nc);  // message from c to par[c]
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int c = *it;
    if (par[c] < 0) continue;
    auto sep = separator(c, par[c]);
    auto m = marginalize(pot[c], jt.cliques[c].vars, sep);
    double z = std::accumulate(m.begin(), m.end(), 0.0);
    if (!(z > 0.0))
      throw InconsistentEvidence("zero-probability evidence during propagation");
    for (double& x : m) x /= z;
    log_evidence += std::log(z);
    multiply_in(pot[par[c]], jt.cliques[par[c]].vars, m, sep);
    msg_up[c] = std::move(m);
  }
  // roots now hold beliefs; collect total probability per component
  std::vector<std::vector<double>> belief(nc);
  for (int c : order) {
    if (par[c] >= 0) continue;
    double z = std::accumulate(pot[c].begin(), pot[c].end(), 0.0);
    if (!(z > 0.0))
      throw InconsistentEvidence("total evidence probability is zero");
    log_evidence += std::log(z);
    belief[c] = pot[c];
    for (double& x : belief[c]) x /= z;
  }

  // outward pass: parent belief, divided by the child's inward message,
  // marginalized to the separator, is the downward message
  for (int c : order) {
    if (par[c] < 0) continue;
    int pr = par[c];
    auto sep = separator(c, pr);
    auto m = marginalize(belief[pr], jt.cliques[pr].vars, sep);
    for (size_t j = 0; j < m.size(); ++j)
      m[j] = msg_up[c][j] > 0.0 ? m[j] / msg_up[c][j] : 0.0;
    belief[c] = pot[c];
    multiply_in(belief[c], jt.cliques[c].vars, m, sep);
    double z = std::accumulate(belief[c].begin(), belief[c].end(), 0.0);
    if (!(z > 0.0))
      throw InconsistentEvidence("zero belief during outward pass");
    for (double& x : belief[c]) x /= z;
  }

  PosteriorTable out;
  out.log_evidence = log_evidence;
  out.marginals.resize(n);
  for (int i = 0; i < n; ++i) {
    int c = jt.evidence_clique[i];
    auto m = marginalize(belief[c], jt.cliques[c].vars, {i});
    double z = m[0] + m[1] + m[2] + m[3];
    for (int s = 0; s < 4; ++s) out.marginals[i][s] = m[s] / z;
  }
  return out;
}

PosteriorTable brute_force_marginals(const Pedigree& p, const GeneticModel& gm,
                                     const std::vector<Geno4>& ev) {
  const int n = p.size();
  if (n > 12)
    throw TooLarge("brute force enumeration capped at 12 individuals, got " +
                   std::to_string(n));
  const Geno4 prior = founder_prior(gm);
  const size_t total = size_t{1} << (2 * n);
  std::vector<int> st(n, 0);
  PosteriorTable out;
  out.marginals.assign(n, Geno4{0, 0, 0, 0});
  double z = 0.0;
  for (size_t idx = 0; idx < total; ++idx) {
    for (int i = 0; i < n; ++i) st[i] = digit(idx, i);
    double pr = 1.0;
    for (int i = 0; i < n && pr > 0.0; ++i) {
      pr *= ev[i][st[i]];
      pr *= p.is_founder(i)
                ? prior[st[i]]
                : transmission_prob(st[i], st[p.father_idx[i]], st[p.mother_idx[i]]);
    }
    if (pr <= 0.0) continue;
    z += pr;
    for (int i = 0; i < n; ++i) out.marginals[i][st[i]] += pr;
  }
  if (!(z > 0.0))
    throw InconsistentEvidence("total evidence probability is zero (brute force)");
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < 4; ++s) out.marginals[i][s] /= z;
  out.log_evidence = std::log(z);
  return out;
}

PosteriorTable genotype_posteriors(const Pedigree& p, const GeneticModel& gm) {
  std::vector<Geno4> ev(p.size());
  for (int i = 0; i < p.size(); ++i)
    ev[i] = build_evidence(p.individuals[i], 1.0, {});
  auto jt = build_junction_tree(p, gm);
  return propagate(jt, ev);
}

}  // namespace pedsurv
