#ifndef CMOEA_NEURO_HPP
#define CMOEA_NEURO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "rng.hpp"

namespace cmoea::neuro {

enum class NodeRole { input, hidden, output };

struct Node {
    std::uint32_t id;
    NodeRole role;
    double bias;
};

struct Connection {
    std::uint32_t source;
    std::uint32_t target;
    double weight;
};

// Directly encoded recurrent network. Node order is meaningful: input k is
// the k-th input-role node, outputs are read in node order, and summation
// follows connection storage order so evaluation is bit-for-bit reproducible.
struct NetworkGenome {
    std::vector<Node> nodes;
    std::vector<Connection> connections;
    std::uint32_t next_node_id = 0;
};

struct GenomeInitConfig {
    int inputs = 10;
    int outputs = 2;
    int hidden_min = 10;
    int hidden_max = 30;
    int connections_min = 50;
    int connections_max = 250;
};

struct MutationConfig {
    double p_add_connection = 0.15;
    double p_delete_connection = 0.05;
    double p_rewire_connection = 0.15;
    double p_add_node = 0.05;
    double p_delete_node = 0.05;
    double p_weight = 0.10;
    double p_bias = 0.10;
    double eta = 15.0;
};

inline double sigmoid(double x) { return 1.0 / (std::exp(-5.0 * x) + 1.0); }

namespace detail {

inline std::uint64_t pair_key(std::uint32_t s, std::uint32_t t) {
    return (static_cast<std::uint64_t>(s) << 32) | t;
}

} // namespace detail

inline std::size_t input_count(const NetworkGenome& g) {
    return static_cast<std::size_t>(
        std::count_if(g.nodes.begin(), g.nodes.end(),
                      [](const Node& n) { return n.role == NodeRole::input; }));
}

inline std::size_t output_count(const NetworkGenome& g) {
    return static_cast<std::size_t>(
        std::count_if(g.nodes.begin(), g.nodes.end(),
                      [](const Node& n) { return n.role == NodeRole::output; }));
}

// Structural integrity checks shared by the loader, the mutation tests and
// debug builds. Throws on violation.
inline void validate_genome(const NetworkGenome& g) {
    std::unordered_set<std::uint32_t> ids;
    std::unordered_set<std::uint32_t> non_input;
    for (const Node& n : g.nodes) {
        cmoea::detail::require(ids.insert(n.id).second,
                               "genome: duplicate node id");
        cmoea::detail::require(n.bias >= -1.0 && n.bias <= 1.0,
                               "genome: bias outside [-1, 1]");
        if (n.role != NodeRole::input) non_input.insert(n.id);
    }
    std::unordered_set<std::uint64_t> pairs;
    for (const Connection& c : g.connections) {
        cmoea::detail::require(ids.count(c.source) != 0,
                               "genome: dangling connection source");
        cmoea::detail::require(non_input.count(c.target) != 0,
                               "genome: connection target must be non-input");
        cmoea::detail::require(pairs.insert(detail::pair_key(c.source, c.target)).second,
                               "genome: duplicate connection");
        cmoea::detail::require(c.weight >= -1.0 && c.weight <= 1.0,
                               "genome: weight outside [-1, 1]");
    }
}

// Activations of all non-input nodes, in genome node order. Zeroed at the
// start of every trial.
struct NetworkState {
    std::vector<double> activations;
};

inline NetworkState make_state(const NetworkGenome& g) {
    NetworkState s;
    s.activations.assign(g.nodes.size() - input_count(g), 0.0);
    return s;
}

// Genome compiled to index form for the simulation hot loop. Produces
// exactly the same floating point results as activate() because each
// node's incoming terms keep their genome connection order.
class CompiledNetwork {
public:
    explicit CompiledNetwork(const NetworkGenome& g) {
        std::vector<int> slot_of_id;   // dense map, node ids are small
        std::uint32_t max_id = 0;
        for (const Node& n : g.nodes) max_id = std::max(max_id, n.id);
        slot_of_id.assign(max_id + 1, -1);

        int input_slot = 0;
        int state_slot = 0;
        std::vector<bool> is_input_id(max_id + 1, false);
        for (const Node& n : g.nodes) {
            if (n.role == NodeRole::input) {
                slot_of_id[n.id] = input_slot++;
                is_input_id[n.id] = true;
            } else {
                slot_of_id[n.id] = state_slot;
                bias_.push_back(n.bias);
                if (n.role == NodeRole::output) output_slots_.push_back(state_slot);
                ++state_slot;
            }
        }
        n_inputs_ = input_slot;
        n_state_ = state_slot;

        std::vector<std::vector<Term>> per_node(n_state_);
        for (const Connection& c : g.connections) {
            Term t;
            t.src = is_input_id[c.source] ? -1 - slot_of_id[c.source]
                                          : slot_of_id[c.source];
            t.w = c.weight;
            per_node[slot_of_id[c.target]].push_back(t);
        }
        offsets_.push_back(0);
        for (const auto& v : per_node) {
            terms_.insert(terms_.end(), v.begin(), v.end());
            offsets_.push_back(terms_.size());
        }
    }

    std::size_t state_size() const { return n_state_; }
    std::size_t num_inputs() const { return n_inputs_; }
    const std::vector<int>& output_slots() const { return output_slots_; }

    // One synchronous step: non-input nodes read the previous step's
    // activations, inputs are read at their current values.
    void step(const double* inputs, const std::vector<double>& prev,
              std::vector<double>& next) const {
        for (std::size_t j = 0; j < n_state_; ++j) {
            double acc = bias_[j];
            for (std::size_t k = offsets_[j]; k < offsets_[j + 1]; ++k) {
                const Term& t = terms_[k];
                acc += t.w * (t.src < 0 ? inputs[-1 - t.src] : prev[t.src]);
            }
            next[j] = sigmoid(acc);
        }
    }

private:
    struct Term {
        int src;   // >= 0: state slot, < 0: input index -1-src
        double w;
    };
    std::size_t n_inputs_ = 0;
    std::size_t n_state_ = 0;
    std::vector<double> bias_;
    std::vector<Term> terms_;
    std::vector<std::size_t> offsets_;
    std::vector<int> output_slots_;
};

// Reference one-step activation; returns output node activations in genome
// node order and advances the state.
inline std::vector<double> activate(const NetworkGenome& g, NetworkState& state,
                                    const std::vector<double>& inputs) {
    cmoea::detail::require(inputs.size() == input_count(g),
                           "activate: wrong input count");
    CompiledNetwork net(g);
    cmoea::detail::require(state.activations.size() == net.state_size(),
                           "activate: state size mismatch");
    std::vector<double> next(net.state_size());
    net.step(inputs.data(), state.activations, next);
    state.activations = std::move(next);
    std::vector<double> out;
    out.reserve(net.output_slots().size());
    for (int s : net.output_slots()) out.push_back(state.activations[s]);
    return out;
}

inline NetworkGenome random_genome(Rng& rng, const GenomeInitConfig& cfg) {
    NetworkGenome g;
    int hidden = cfg.hidden_min +
        static_cast<int>(rng.uniform_index(
            static_cast<std::size_t>(cfg.hidden_max - cfg.hidden_min + 1)));
    int want = cfg.connections_min +
        static_cast<int>(rng.uniform_index(static_cast<std::size_t>(
            cfg.connections_max - cfg.connections_min + 1)));

    std::uint32_t id = 0;
    for (int i = 0; i < cfg.inputs; ++i)
        g.nodes.push_back({id++, NodeRole::input, 0.0});
    for (int i = 0; i < cfg.outputs; ++i)
        g.nodes.push_back({id++, NodeRole::output, rng.uniform(-1.0, 1.0)});
    for (int i = 0; i < hidden; ++i)
        g.nodes.push_back({id++, NodeRole::hidden, rng.uniform(-1.0, 1.0)});
    g.next_node_id = id;

    // Uniform sample of distinct (source, target) pairs via partial shuffle.
    std::vector<std::uint64_t> pairs;
    for (const Node& s : g.nodes)
        for (const Node& t : g.nodes)
            if (t.role != NodeRole::input)
                pairs.push_back(detail::pair_key(s.id, t.id));
    if (static_cast<std::size_t>(want) > pairs.size()) {
        std::cerr << "random_genome: requested " << want
                  << " connections, only " << pairs.size()
                  << " distinct pairs available\n";
        want = static_cast<int>(pairs.size());
    }
    for (int i = 0; i < want; ++i) {
        std::size_t j = i + rng.uniform_index(pairs.size() - i);
        std::swap(pairs[i], pairs[j]);
        g.connections.push_back({static_cast<std::uint32_t>(pairs[i] >> 32),
                                 static_cast<std::uint32_t>(pairs[i] & 0xffffffffu),
                                 rng.uniform(-1.0, 1.0)});
    }
    return g;
}

// Deb's bounded polynomial mutation, result clipped to [lo, hi].
inline double polynomial_mutate(double x, double eta, double lo, double hi,
                                double u) {
    cmoea::detail::require(hi > lo && x >= lo && x <= hi,
                           "polynomial_mutate: bad bounds");
    double d1 = (x - lo) / (hi - lo);
    double d2 = (hi - x) / (hi - lo);
    double mpow = 1.0 / (eta + 1.0);
    double dq;
    if (u <= 0.5) {
        double xy = 1.0 - d1;
        double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0);
        dq = std::pow(val, mpow) - 1.0;
    } else {
        double xy = 1.0 - d2;
        double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0);
        dq = 1.0 - std::pow(val, mpow);
    }
    return std::clamp(x + dq * (hi - lo), lo, hi);
}

inline double polynomial_mutate(double x, double eta, double lo, double hi,
                                Rng& rng) {
    return polynomial_mutate(x, eta, lo, hi, rng.uniform());
}

namespace detail {

inline std::unordered_set<std::uint64_t> pair_set(const NetworkGenome& g) {
    std::unordered_set<std::uint64_t> s;
    s.reserve(g.connections.size() * 2);
    for (const Connection& c : g.connections)
        s.insert(pair_key(c.source, c.target));
    return s;
}

inline void add_connection(NetworkGenome& g, Rng& rng) {
    auto existing = pair_set(g);
    std::vector<std::uint64_t> absent;
    for (const Node& s : g.nodes)
        for (const Node& t : g.nodes)
            if (t.role != NodeRole::input &&
                existing.count(pair_key(s.id, t.id)) == 0)
                absent.push_back(pair_key(s.id, t.id));
    if (absent.empty()) return;
    std::uint64_t p = absent[rng.uniform_index(absent.size())];
    g.connections.push_back({static_cast<std::uint32_t>(p >> 32),
                             static_cast<std::uint32_t>(p & 0xffffffffu),
                             rng.uniform(-1.0, 1.0)});
}

// Scan connections in storage order, each fires with the configured
// probability, and the scan stops at the first connection actually rewired.
// One endpoint is replaced: the source with 50% probability, otherwise the
// target. Candidates that duplicate an existing connection (or keep the
// endpoint unchanged) are excluded.
inline void rewire_connection(NetworkGenome& g, Rng& rng, double p) {
    auto existing = pair_set(g);
    for (Connection& c : g.connections) {
        if (!rng.bernoulli(p)) continue;
        bool change_source = rng.bernoulli(0.5);
        std::vector<std::uint32_t> candidates;
        for (const Node& n : g.nodes) {
            if (change_source) {
                if (n.id != c.source &&
                    existing.count(pair_key(n.id, c.target)) == 0)
                    candidates.push_back(n.id);
            } else {
                if (n.role != NodeRole::input && n.id != c.target &&
                    existing.count(pair_key(c.source, n.id)) == 0)
                    candidates.push_back(n.id);
            }
        }
        if (candidates.empty()) continue;
        std::uint32_t pick = candidates[rng.uniform_index(candidates.size())];
        existing.erase(pair_key(c.source, c.target));
        if (change_source)
            c.source = pick;
        else
            c.target = pick;
        existing.insert(pair_key(c.source, c.target));
        return;
    }
}

// Splits a uniformly chosen connection through a fresh hidden node with
// bias 0; both new connections inherit the old weight.
inline void add_node(NetworkGenome& g, Rng& rng) {
    if (g.connections.empty()) return;
    std::size_t idx = rng.uniform_index(g.connections.size());
    Connection old = g.connections[idx];
    std::uint32_t nid = g.next_node_id++;
    g.nodes.push_back({nid, NodeRole::hidden, 0.0});
    g.connections[idx] = {old.source, nid, old.weight};
    g.connections.push_back({nid, old.target, old.weight});
}

inline void delete_node(NetworkGenome& g, Rng& rng) {
    std::vector<std::size_t> hidden;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].role == NodeRole::hidden) hidden.push_back(i);
    if (hidden.empty()) return;
    std::uint32_t victim = g.nodes[hidden[rng.uniform_index(hidden.size())]].id;
    std::erase_if(g.nodes, [&](const Node& n) { return n.id == victim; });
    std::erase_if(g.connections, [&](const Connection& c) {
        return c.source == victim || c.target == victim;
    });
}

} // namespace detail

// Whole-genome mutation pipeline: structural operators fire at most once
// per offspring, parametric operators fire per element.
inline NetworkGenome mutate(const NetworkGenome& parent, Rng& rng,
                            const MutationConfig& cfg) {
    NetworkGenome g = parent;
    if (rng.bernoulli(cfg.p_add_connection)) detail::add_connection(g, rng);
    if (rng.bernoulli(cfg.p_delete_connection) && !g.connections.empty())
        g.connections.erase(g.connections.begin() +
                            static_cast<std::ptrdiff_t>(
                                rng.uniform_index(g.connections.size())));
    detail::rewire_connection(g, rng, cfg.p_rewire_connection);
    if (rng.bernoulli(cfg.p_add_node)) detail::add_node(g, rng);
    if (rng.bernoulli(cfg.p_delete_node)) detail::delete_node(g, rng);
    for (Connection& c : g.connections)
        if (rng.bernoulli(cfg.p_weight))
            c.weight = polynomial_mutate(c.weight, cfg.eta, -1.0, 1.0, rng);
    for (Node& n : g.nodes)
        if (n.role != NodeRole::input && rng.bernoulli(cfg.p_bias))
            n.bias = polynomial_mutate(n.bias, cfg.eta, -1.0, 1.0, rng);
    return g;
}

inline const char* role_name(NodeRole r) {
    switch (r) {
        case NodeRole::input: return "input";
        case NodeRole::output: return "output";
        default: return "hidden";
    }
}

inline NodeRole role_from_name(const std::string& s) {
    if (s == "input") return NodeRole::input;
    if (s == "output") return NodeRole::output;
    if (s == "hidden") return NodeRole::hidden;
    throw std::runtime_error("genome file: unknown node role '" + s + "'");
}

inline constexpr int genome_format_version = 1;

inline nlohmann::json to_json(const NetworkGenome& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const Node& n : g.nodes)
        nodes.push_back({{"id", n.id}, {"role", role_name(n.role)}, {"bias", n.bias}});
    nlohmann::json conns = nlohmann::json::array();
    for (const Connection& c : g.connections)
        conns.push_back({{"source", c.source}, {"target", c.target}, {"weight", c.weight}});
    return {{"format_version", genome_format_version},
            {"nodes", nodes},
            {"connections", conns}};
}

inline NetworkGenome genome_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != genome_format_version)
            throw std::runtime_error("genome file: unsupported format_version");
        NetworkGenome g;
        for (const auto& n : j.at("nodes"))
            g.nodes.push_back({n.at("id").get<std::uint32_t>(),
                               role_from_name(n.at("role").get<std::string>()),
                               n.at("bias").get<double>()});
        for (const auto& c : j.at("connections"))
            g.connections.push_back({c.at("source").get<std::uint32_t>(),
                                     c.at("target").get<std::uint32_t>(),
                                     c.at("weight").get<double>()});
        std::uint32_t max_id = 0;
        for (const Node& n : g.nodes) max_id = std::max(max_id, n.id);
        g.next_node_id = g.nodes.empty() ? 0 : max_id + 1;
        validate_genome(g);
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("genome file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("genome file: ") + e.what());
    }
}

} // namespace cmoea::neuro

#endif
