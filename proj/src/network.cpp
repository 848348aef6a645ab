#include "adabasis/network.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace adabasis {

std::string to_string(ArchKind kind) { return kind == ArchKind::plain ? "plain" : "resnet"; }
std::string to_string(Activation act) { return act == Activation::relu ? "relu" : "tanh"; }

ArchKind parse_arch_kind(const std::string& s) {
  if (s == "plain") return ArchKind::plain;
  if (s == "resnet") return ArchKind::resnet;
  throw InvalidArgument("unknown architecture '" + s + "' (expected plain|resnet)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + s + "' (expected relu|tanh)");
}

void Architecture::validate() const {
  if (input_dim < 1 || width < 1 || depth < 1 || outputs < 1)
    throw InvalidArgument("architecture: input_dim, width, depth and outputs must all be >= 1");
}

void NetworkParams::validate(const Architecture& arch) const {
  arch.validate();
  if (static_cast<int>(hidden.size()) != arch.depth)
    throw InvalidArgument("network params: layer count does not match depth");
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const auto& layer = hidden[l];
    const Eigen::Index in = l == 0 ? arch.input_dim : arch.width;
    if (layer.weight.rows() != arch.width || layer.weight.cols() != in || layer.bias.size() != arch.width)
      throw InvalidArgument("network params: layer " + std::to_string(l + 1) + " has wrong shape");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw InvalidArgument("network params: layer " + std::to_string(l + 1) + " has non-finite entries");
  }
  if (linear.rows() != arch.width || linear.cols() != arch.outputs)
    throw InvalidArgument("network params: linear coefficients must be width x outputs");
  if (!linear.allFinite()) throw InvalidArgument("network params: non-finite linear coefficients");
}

std::uint64_t NetworkParams::fingerprint() const {
  // FNV-1a over the raw bytes of every hidden parameter.
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const double* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
    h ^= static_cast<std::uint64_t>(n);
    h *= 1099511628211ULL;
  };
  for (const auto& layer : hidden) {
    feed(layer.weight.data(), layer.weight.size());
    feed(layer.bias.data(), layer.bias.size());
  }
  return h;
}

HiddenGrad zeros_like_hidden(const NetworkParams& params) {
  HiddenGrad out;
  out.reserve(params.hidden.size());
  for (const auto& layer : params.hidden)
    out.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
  return out;
}

Eigen::Index hidden_param_count(const NetworkParams& params) {
  Eigen::Index n = 0;
  for (const auto& layer : params.hidden) n += layer.weight.size() + layer.bias.size();
  return n;
}

Vector flatten_hidden(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  Vector flat(n);
  Eigen::Index pos = 0;
  for (const auto& layer : layers) {
    flat.segment(pos, layer.weight.size()) = Eigen::Map<const Vector>(layer.weight.data(), layer.weight.size());
    pos += layer.weight.size();
    flat.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  return flat;
}

void unflatten_hidden(const Vector& flat, std::vector<DenseLayer>& layers) {
  Eigen::Index pos = 0;
  for (auto& layer : layers) {
    if (pos + layer.weight.size() + layer.bias.size() > flat.size())
      throw InvalidArgument("unflatten_hidden: vector too short");
    Eigen::Map<Vector>(layer.weight.data(), layer.weight.size()) = flat.segment(pos, layer.weight.size());
    pos += layer.weight.size();
    layer.bias = flat.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
  if (pos != flat.size()) throw InvalidArgument("unflatten_hidden: vector too long");
}

double activate(Activation act, double z) { return act == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

double activate_d1(Activation act, double z) {
  if (act == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

double activate_d2(Activation act, double z) {
  if (act == Activation::relu) return 0.0;
  const double t = std::tanh(z);
  return -2.0 * t * (1.0 - t * t);
}

namespace {

Matrix apply(Activation act, const Matrix& z, double (*f)(Activation, double)) {
  return z.unaryExpr([act, f](double v) { return f(act, v); });
}

void check_input(const NetworkParams& params, const Architecture& arch, const Matrix& x) {
  params.validate(arch);
  if (x.cols() != arch.input_dim)
    throw InvalidArgument("network: input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(arch.input_dim));
  if (x.rows() < 1) throw InvalidArgument("network: empty input");
  require_finite(x, "network input");
}

bool has_skip(const Architecture& arch, std::size_t layer) { return arch.kind == ArchKind::resnet && layer > 0; }

}  // namespace

Matrix apply_hidden_layer(const DenseLayer& layer, Activation act, bool skip, const Matrix& x) {
  if (x.cols() != layer.weight.cols()) throw InvalidArgument("apply_hidden_layer: input width mismatch");
  if (skip && layer.weight.rows() != layer.weight.cols()) throw InvalidArgument("apply_hidden_layer: skip needs a square layer");
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  Matrix out = apply(act, z, activate);
  if (skip) out += x;
  return out;
}

BasisEval forward_basis(const NetworkParams& params, const Architecture& arch, const Matrix& x, bool with_jacobian) {
  check_input(params, arch, x);
  const Eigen::Index n = x.rows();
  const int d = arch.input_dim;

  BasisEval out;
  out.params_fingerprint = params.fingerprint();
  out.layers.reserve(params.hidden.size());

  Matrix state = x;
  std::vector<Matrix> tangents;
  if (with_jacobian) {
    tangents.assign(static_cast<std::size_t>(d), Matrix::Zero(n, d));
    for (int k = 0; k < d; ++k) tangents[static_cast<std::size_t>(k)].col(k).setOnes();
  }

  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const auto& layer = params.hidden[l];
    Matrix z = state * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    Matrix next = apply(arch.activation, z, activate);
    if (has_skip(arch, l)) next += state;

    std::vector<Matrix> next_tangents;
    if (with_jacobian) {
      const Matrix slope = apply(arch.activation, z, activate_d1);
      next_tangents.reserve(tangents.size());
      for (const auto& t : tangents) {
        Matrix u = (t * layer.weight.transpose()).cwiseProduct(slope);
        if (has_skip(arch, l)) u += t;
        next_tangents.push_back(std::move(u));
      }
    }

    out.layers.push_back({std::move(state), std::move(z), std::move(tangents)});
    state = std::move(next);
    tangents = std::move(next_tangents);
  }
  out.phi = std::move(state);
  out.jac = std::move(tangents);
  return out;
}

Matrix forward_output(const NetworkParams& params, const Architecture& arch, const Matrix& x) {
  return forward_basis(params, arch, x).phi * params.linear;
}

std::vector<Matrix> input_jacobian_basis(const NetworkParams& params, const Architecture& arch, const Matrix& x) {
  return forward_basis(params, arch, x, true).jac;
}

HiddenGrad param_vjp(const BasisEval& eval, const NetworkParams& params, const Architecture& arch,
                     const Matrix& g_phi, const std::vector<Matrix>& g_jac) {
  if (eval.layers.size() != params.hidden.size() || eval.params_fingerprint != params.fingerprint())
    throw InvalidArgument("param_vjp: cache is missing or was computed for different parameters");
  if (g_phi.rows() != eval.phi.rows() || g_phi.cols() != eval.phi.cols())
    throw InvalidArgument("param_vjp: basis cotangent has wrong shape");
  const bool with_jac = !g_jac.empty();
  if (with_jac) {
    if (!eval.has_jacobian()) throw InvalidArgument("param_vjp: Jacobian cotangent given but cache has no tangents");
    if (g_jac.size() != eval.jac.size()) throw InvalidArgument("param_vjp: Jacobian cotangent has wrong input dim");
    for (const auto& g : g_jac)
      if (g.rows() != eval.phi.rows() || g.cols() != eval.phi.cols())
        throw InvalidArgument("param_vjp: Jacobian cotangent has wrong shape");
  }
  require_finite(g_phi, "param_vjp: basis cotangent");
  for (const auto& g : g_jac) require_finite(g, "param_vjp: Jacobian cotangent");

  HiddenGrad grad = zeros_like_hidden(params);
  Matrix adj_state = g_phi;
  std::vector<Matrix> adj_tangent = g_jac;

  for (std::size_t idx = params.hidden.size(); idx-- > 0;) {
    const auto& layer = params.hidden[idx];
    const auto& cache = eval.layers[idx];
    const bool skip = has_skip(arch, idx);

    const Matrix slope = apply(arch.activation, cache.preact, activate_d1);
    Matrix adj_pre = adj_state.cwiseProduct(slope);

    std::vector<Matrix> adj_prev_tangent;
    if (with_jac) {
      const Matrix curv = apply(arch.activation, cache.preact, activate_d2);
      Matrix adj_slope = Matrix::Zero(slope.rows(), slope.cols());
      adj_prev_tangent.reserve(adj_tangent.size());
      for (std::size_t k = 0; k < adj_tangent.size(); ++k) {
        const Matrix& t_in = cache.tangents[k];
        const Matrix u = t_in * layer.weight.transpose();
        adj_slope += adj_tangent[k].cwiseProduct(u);
        const Matrix adj_u = adj_tangent[k].cwiseProduct(slope);
        grad[idx].weight.noalias() += adj_u.transpose() * t_in;
        Matrix prev = adj_u * layer.weight;
        if (skip) prev += adj_tangent[k];
        adj_prev_tangent.push_back(std::move(prev));
      }
      adj_pre += adj_slope.cwiseProduct(curv);
    }

    grad[idx].weight.noalias() += adj_pre.transpose() * cache.input;
    grad[idx].bias = adj_pre.colwise().sum().transpose();
    Matrix adj_prev = adj_pre * layer.weight;
    if (skip) adj_prev += adj_state;

    adj_state = std::move(adj_prev);
    adj_tangent = std::move(adj_prev_tangent);
  }
  return grad;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InvalidArgument("checkpoint: matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

}  // namespace

std::string checkpoint_to_json(const Architecture& arch, const NetworkParams& params) {
  params.validate(arch);
  nlohmann::json j;
  j["arch"] = {{"kind", to_string(arch.kind)},   {"activation", to_string(arch.activation)},
               {"input_dim", arch.input_dim},     {"width", arch.width},
               {"depth", arch.depth},             {"outputs", arch.outputs}};
  j["hidden"] = nlohmann::json::array();
  for (const auto& layer : params.hidden)
    j["hidden"].push_back({{"weight", matrix_json(layer.weight)},
                           {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  j["linear"] = matrix_json(params.linear);
  return j.dump();
}

void checkpoint_from_json(const std::string& text, Architecture& arch, NetworkParams& params) {
  const auto j = nlohmann::json::parse(text);
  const auto& a = j.at("arch");
  Architecture parsed;
  parsed.kind = parse_arch_kind(a.at("kind").get<std::string>());
  parsed.activation = parse_activation(a.at("activation").get<std::string>());
  parsed.input_dim = a.at("input_dim").get<int>();
  parsed.width = a.at("width").get<int>();
  parsed.depth = a.at("depth").get<int>();
  parsed.outputs = a.at("outputs").get<int>();

  NetworkParams p;
  for (const auto& layer : j.at("hidden")) {
    const auto bias = layer.at("bias").get<std::vector<double>>();
    p.hidden.push_back({matrix_from_json(layer.at("weight")), Eigen::Map<const Vector>(bias.data(), bias.size())});
  }
  p.linear = matrix_from_json(j.at("linear"));
  p.validate(parsed);
  arch = parsed;
  params = std::move(p);
}

void save_checkpoint(const std::filesystem::path& path, const Architecture& arch, const NetworkParams& params) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << checkpoint_to_json(arch, params) << '\n';
}

void load_checkpoint(const std::filesystem::path& path, Architecture& arch, NetworkParams& params) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  checkpoint_from_json(ss.str(), arch, params);
}

}  // namespace adabasis
