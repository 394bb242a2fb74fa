#pragma once

// Convolutional LSTM cell. Gate pre-activations come from two 3x3
// convolutions (input-to-gates with bias, hidden-to-gates without), summed
// and split into the four gates in fixed (i, f, g, o) order.

#include <utility>

#include "girnet/autodiff.hpp"
#include "girnet/conv.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

template <typename T>
struct CellParams {
  ConvParams<T> input;   // (4*C_h, C_in, 3, 3) with bias
  ConvParams<T> hidden;  // (4*C_h, C_h, 3, 3) bias-free

  void validate() const {
    input.validate();
    hidden.validate();
    if (input.bias.empty())
      throw std::invalid_argument("CellParams: input conv must have a bias");
    if (!hidden.bias.empty())
      throw std::invalid_argument("CellParams: hidden conv must be bias-free");
    const int gates = input.weight.dim(0);
    if (gates % 4 != 0 || hidden.weight.dim(0) != gates)
      throw std::invalid_argument("CellParams: gate channels must be 4*C_h on both convs, got " +
                                  shape_str(input.weight.shape()) + " and " +
                                  shape_str(hidden.weight.shape()));
    if (hidden.weight.dim(1) != gates / 4)
      throw std::invalid_argument("CellParams: hidden conv input channels must equal C_h, got " +
                                  shape_str(hidden.weight.shape()));
  }
};

template <typename T>
struct CellRef {
  ConvRef<T> input;
  ConvRef<T> hidden;
};

template <typename T>
CellRef<T> bind_cell(Tape<T>& tape, const CellParams<T>& p, bool requires_grad = true) {
  p.validate();
  return CellRef<T>{bind_conv(tape, p.input, requires_grad),
                    bind_conv(tape, p.hidden, requires_grad)};
}

// One recurrence step: returns (h', c').
template <typename T>
std::pair<Var<T>, Var<T>> convlstm_cell(Var<T> x, Var<T> h, Var<T> c, const CellRef<T>& p) {
  Tape<T>& t = *x.tape;
  check_same_shape(t.value(h.id), t.value(c.id), "convlstm_cell");
  const int ch = t.value(c.id).dim(1);
  Var<T> gates = add(conv2d(x, p.input), conv2d(h, p.hidden));
  if (gates.value().dim(1) != 4 * ch)
    throw std::invalid_argument("convlstm_cell: gate channels " +
                                shape_str(gates.value().shape()) + " do not match state " +
                                shape_str(t.value(c.id).shape()));
  Var<T> i = sigmoid(slice_channels(gates, 0, ch));
  Var<T> f = sigmoid(slice_channels(gates, ch, 2 * ch));
  Var<T> g = tanh(slice_channels(gates, 2 * ch, 3 * ch));
  Var<T> o = sigmoid(slice_channels(gates, 3 * ch, 4 * ch));
  Var<T> c2 = add(mul(f, c), mul(i, g));
  Var<T> h2 = mul(o, tanh(c2));
  return {h2, c2};
}

}  // namespace girnet
