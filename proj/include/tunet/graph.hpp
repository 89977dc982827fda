#ifndef TUNET_GRAPH_HPP
#define TUNET_GRAPH_HPP

#include "tunet/io.hpp"
#include "tunet/layers.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tunet {

/// DAG of layers in topological (construction) order. Node 0 is the input
/// placeholder; the last-marked node is the output. Activations are kept per
/// node so multi-consumer edges and backward work without recomputation.
template <typename Scalar>
class Graph {
public:
    struct Node {
        std::string name;
        std::unique_ptr<Layer<Scalar>> layer;  // null for the input placeholder
        std::vector<int> in;
    };

    Graph() {
        nodes_.push_back(Node{"input", nullptr, {}});
        acts_.emplace_back();
    }

    int add(std::string name, std::unique_ptr<Layer<Scalar>> layer, std::vector<int> inputs) {
        for (int i : inputs)
            require(i >= 0 && i < int(nodes_.size()), "graph: input edge from unknown node");
        nodes_.push_back(Node{std::move(name), std::move(layer), std::move(inputs)});
        acts_.emplace_back();
        output_ = int(nodes_.size()) - 1;
        return output_;
    }

    int input_node() const { return 0; }
    int output_node() const { return output_; }
    void set_output(int node) { output_ = node; }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(int i) const { return nodes_[std::size_t(i)]; }

    Tensor5<Scalar> forward(const Tensor5<Scalar>& x) {
        require(output_ > 0, "graph: empty graph");
        acts_[0] = x;
        for (std::size_t i = 1; i < nodes_.size(); ++i) {
            std::vector<const Tensor5<Scalar>*> ins;
            ins.reserve(nodes_[i].in.size());
            for (int j : nodes_[i].in) ins.push_back(&acts_[std::size_t(j)]);
            acts_[i] = nodes_[i].layer->forward(ins);
#ifndef NDEBUG
            if (!acts_[i].data.isFinite().all())
                throw NumericError("non-finite activation at node " + nodes_[i].name);
#endif
        }
        return acts_[std::size_t(output_)];
    }

    /// Backpropagates from the output node; returns the gradient w.r.t. the
    /// graph input. Parameter gradients accumulate into the blocks.
    Tensor5<Scalar> backward(const Tensor5<Scalar>& gout) {
        std::vector<Tensor5<Scalar>> grads(nodes_.size());
        grads[std::size_t(output_)] = gout;
        for (std::size_t i = nodes_.size() - 1; i >= 1; --i) {
            if (grads[i].data.size() == 0) continue;  // node not on a path to the output
            std::vector<Tensor5<Scalar>> gin = nodes_[i].layer->backward(grads[i]);
            require(gin.size() == nodes_[i].in.size(), "graph: backward arity mismatch");
            for (std::size_t j = 0; j < gin.size(); ++j) {
                auto& slot = grads[std::size_t(nodes_[i].in[j])];
                if (slot.data.size() == 0)
                    slot = std::move(gin[j]);
                else
                    slot.data += gin[j].data;
            }
#ifndef NDEBUG
            for (std::size_t j = 0; j < nodes_[i].in.size(); ++j)
                if (!grads[std::size_t(nodes_[i].in[j])].data.isFinite().all())
                    throw NumericError("non-finite gradient below node " + nodes_[i].name);
#endif
        }
        return std::move(grads[0]);
    }

    /// Activation of a node from the most recent forward pass.
    const Tensor5<Scalar>& activation(const std::string& name) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].name == name) return acts_[i];
        throw DataError("graph: no node named " + name);
    }

    std::vector<ParamBlock<Scalar>*> params() {
        std::vector<ParamBlock<Scalar>*> out;
        for (auto& n : nodes_)
            if (n.layer)
                for (ParamBlock<Scalar>* p : n.layer->params()) out.push_back(p);
        return out;
    }

    void zero_grads() {
        for (ParamBlock<Scalar>* p : params()) p->grad.setZero();
    }

private:
    std::vector<Node> nodes_;
    std::vector<Tensor5<Scalar>> acts_;
    int output_ = -1;
};

/// Snapshot of every parameter value, for best-epoch tracking.
template <typename Scalar>
std::vector<ArrayX<Scalar>> snapshot_params(Graph<Scalar>& g) {
    std::vector<ArrayX<Scalar>> out;
    for (ParamBlock<Scalar>* p : g.params()) out.push_back(p->value);
    return out;
}

template <typename Scalar>
void restore_params(Graph<Scalar>& g, const std::vector<ArrayX<Scalar>>& snap) {
    auto blocks = g.params();
    require(blocks.size() == snap.size(), "restore_params: snapshot size mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i]->value = snap[i];
}

// ---------------------------------------------------------------------------
// Bridging to the MPAR parameter container.
// ---------------------------------------------------------------------------

inline std::vector<ParamFileEntry> params_to_entries(Graph<float>& g) {
    std::vector<ParamFileEntry> out;
    for (ParamBlock<float>* p : g.params()) out.push_back({p->name, p->value});
    return out;
}

/// Loads name-keyed blocks into a graph; the first missing or shape-mismatched
/// block is reported by name.
inline void entries_to_params(Graph<float>& g, const std::vector<ParamFileEntry>& entries) {
    std::map<std::string, const ParamFileEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    for (ParamBlock<float>* p : g.params()) {
        auto it = by_name.find(p->name);
        if (it == by_name.end())
            throw DataError("parameter block missing from file: " + p->name);
        if (it->second->values.size() != p->value.size())
            throw DataError("parameter block shape mismatch for " + p->name + ": file has " +
                            std::to_string(it->second->values.size()) + " values, network needs " +
                            std::to_string(p->value.size()));
        p->value = it->second->values;
    }
}

}  // namespace tunet

#endif
