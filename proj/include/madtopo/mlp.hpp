#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "madtopo/rng.hpp"

namespace madtopo {

// Small fully-connected net with tanh hidden layers and a linear output
// head, plus manual reverse-mode differentiation. Forward passes on
// immutable parameters are thread-safe; traces are caller-owned.
class Mlp {
public:
	struct Layer {
		int in = 0;
		int out = 0;
		std::vector<double> weight; // out x in, row-major
		std::vector<double> bias;	// out
	};

	// Per-layer activations recorded during a forward pass.
	struct Trace {
		std::vector<double> input;
		std::vector<std::vector<double>> post; // post-activation output of each layer
	};

	struct Grads {
		std::vector<Layer> layers; // same shapes as the net, weights/biases hold gradients

		void zero()
		{
			for (auto& l : layers)
			{
				std::fill(l.weight.begin(), l.weight.end(), 0.0);
				std::fill(l.bias.begin(), l.bias.end(), 0.0);
			}
		}
	};

	Mlp() = default;

	// sizes = {input, hidden..., output}. Hidden layers use Glorot-uniform
	// init; the output layer is zero-initialized so untrained heads emit 0.
	Mlp(const std::vector<int>& sizes, Rng& rng)
	{
		if (sizes.size() < 2) { throw std::invalid_argument("Mlp: need at least input and output sizes"); }
		for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
		{
			Layer l;
			l.in = sizes[k];
			l.out = sizes[k + 1];
			l.weight.resize(static_cast<std::size_t>(l.in) * l.out);
			l.bias.assign(l.out, 0.0);
			const bool is_output = (k + 2 == sizes.size());
			if (is_output)
			{
				std::fill(l.weight.begin(), l.weight.end(), 0.0);
			}
			else
			{
				const double bound = std::sqrt(6.0 / (l.in + l.out));
				for (auto& v : l.weight) { v = (2.0 * rng.uniform() - 1.0) * bound; }
			}
			layers_.push_back(std::move(l));
		}
	}

	int input_size() const { return layers_.front().in; }
	int output_size() const { return layers_.back().out; }
	const std::vector<Layer>& layers() const { return layers_; }
	std::vector<Layer>& layers() { return layers_; }

	std::vector<double> forward(const std::vector<double>& x, Trace* trace = nullptr) const
	{
		if (static_cast<int>(x.size()) != input_size())
		{
			throw std::invalid_argument("Mlp::forward: input size mismatch");
		}
		if (trace)
		{
			trace->input = x;
			trace->post.clear();
		}
		std::vector<double> cur = x;
		for (std::size_t k = 0; k < layers_.size(); ++k)
		{
			const Layer& l = layers_[k];
			std::vector<double> next(l.out);
			for (int o = 0; o < l.out; ++o)
			{
				double acc = l.bias[o];
				const double* wrow = &l.weight[static_cast<std::size_t>(o) * l.in];
				for (int i = 0; i < l.in; ++i) { acc += wrow[i] * cur[i]; }
				next[o] = acc;
			}
			if (k + 1 < layers_.size())
			{
				for (auto& v : next) { v = std::tanh(v); }
			}
			if (trace) { trace->post.push_back(next); }
			cur = std::move(next);
		}
		return cur;
	}

	Grads make_grads() const
	{
		Grads g;
		for (const auto& l : layers_)
		{
			Layer gl;
			gl.in = l.in;
			gl.out = l.out;
			gl.weight.assign(l.weight.size(), 0.0);
			gl.bias.assign(l.bias.size(), 0.0);
			g.layers.push_back(std::move(gl));
		}
		return g;
	}

	// Accumulates parameter gradients for the recorded forward pass given
	// dLoss/dOutput; returns dLoss/dInput.
	std::vector<double> backward(const Trace& trace, const std::vector<double>& grad_out, Grads& grads) const
	{
		if (trace.post.size() != layers_.size())
		{
			throw std::logic_error("Mlp::backward: trace does not match a forward pass");
		}
		if (grad_out.size() != static_cast<std::size_t>(output_size()))
		{
			throw std::invalid_argument("Mlp::backward: output gradient size mismatch");
		}
		std::vector<double> delta = grad_out;
		for (int k = static_cast<int>(layers_.size()) - 1; k >= 0; --k)
		{
			const Layer& l = layers_[static_cast<std::size_t>(k)];
			Layer& gl = grads.layers[static_cast<std::size_t>(k)];
			const bool hidden = (k + 1 < static_cast<int>(layers_.size()));
			if (hidden)
			{
				// d tanh(u)/du = 1 - tanh(u)^2, and post holds tanh(u)
				const auto& a = trace.post[static_cast<std::size_t>(k)];
				for (int o = 0; o < l.out; ++o) { delta[o] *= 1.0 - a[o] * a[o]; }
			}
			const std::vector<double>& in =
				(k == 0) ? trace.input : trace.post[static_cast<std::size_t>(k) - 1];
			std::vector<double> grad_in(l.in, 0.0);
			for (int o = 0; o < l.out; ++o)
			{
				gl.bias[o] += delta[o];
				double* gwrow = &gl.weight[static_cast<std::size_t>(o) * l.in];
				const double* wrow = &l.weight[static_cast<std::size_t>(o) * l.in];
				const double d = delta[o];
				for (int i = 0; i < l.in; ++i)
				{
					gwrow[i] += d * in[i];
					grad_in[i] += d * wrow[i];
				}
			}
			delta = std::move(grad_in);
		}
		return delta;
	}

	std::size_t num_params() const
	{
		std::size_t total = 0;
		for (const auto& l : layers_) { total += l.weight.size() + l.bias.size(); }
		return total;
	}

	double get_param(std::size_t idx) const { return *param_ptr(idx); }
	void set_param(std::size_t idx, double v) { *const_cast<double*>(param_ptr(idx)) = v; }

	// SGD with optional momentum; grads are consumed as-is.
	void apply_gradients(const Grads& grads, double lr, double momentum, Grads* velocity)
	{
		for (std::size_t k = 0; k < layers_.size(); ++k)
		{
			Layer& l = layers_[k];
			const Layer& g = grads.layers[k];
			if (momentum > 0.0 && velocity)
			{
				Layer& v = velocity->layers[k];
				for (std::size_t i = 0; i < l.weight.size(); ++i)
				{
					v.weight[i] = momentum * v.weight[i] + g.weight[i];
					l.weight[i] -= lr * v.weight[i];
				}
				for (std::size_t i = 0; i < l.bias.size(); ++i)
				{
					v.bias[i] = momentum * v.bias[i] + g.bias[i];
					l.bias[i] -= lr * v.bias[i];
				}
			}
			else
			{
				for (std::size_t i = 0; i < l.weight.size(); ++i) { l.weight[i] -= lr * g.weight[i]; }
				for (std::size_t i = 0; i < l.bias.size(); ++i) { l.bias[i] -= lr * g.bias[i]; }
			}
		}
	}

private:
	const double* param_ptr(std::size_t idx) const
	{
		for (const auto& l : layers_)
		{
			if (idx < l.weight.size()) { return &l.weight[idx]; }
			idx -= l.weight.size();
			if (idx < l.bias.size()) { return &l.bias[idx]; }
			idx -= l.bias.size();
		}
		throw std::out_of_range("Mlp: parameter index");
	}

	std::vector<Layer> layers_;
};

} // namespace madtopo
