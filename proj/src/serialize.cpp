#include "dts/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dts/errors.hpp"

namespace dts {

namespace {

constexpr int kFormatVersion = 1;

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// A covariance is serializable only in isotropic form.
Real isotropic_sigma2(const Covariance& cov, const char* what) {
  const Mat& m = cov.matrix();
  const Real s = m(0, 0);
  if ((m - s * Mat::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError(std::string(what) + ": only isotropic covariances are serializable");
  return s;
}

std::string kind_name(LinkFn::Kind kind) {
  switch (kind) {
    case LinkFn::Kind::kLinear: return "linear";
    case LinkFn::Kind::kMlpDirect: return "mlp_direct";
    case LinkFn::Kind::kDdpmEps: return "ddpm_eps";
  }
  throw std::logic_error("unreachable link kind");
}

void write_block(std::ostream& out, const char* name, const std::vector<Real>& values) {
  out << name << ' ' << values.size() << '\n';
  for (std::size_t i = 0; i < values.size(); ++i)
    out << format_real(values[i]) << ((i + 1) % 8 == 0 || i + 1 == values.size() ? '\n' : ' ');
}

std::vector<Real> flatten_net(const MlpNet& net) {
  std::vector<Real> v;
  v.reserve(net.w1.size() + net.b1.size() + net.w2.size() + net.b2.size());
  for (Index r = 0; r < net.w1.rows(); ++r)
    for (Index c = 0; c < net.w1.cols(); ++c) v.push_back(net.w1(r, c));
  for (Index i = 0; i < net.b1.size(); ++i) v.push_back(net.b1[i]);
  for (Index r = 0; r < net.w2.rows(); ++r)
    for (Index c = 0; c < net.w2.cols(); ++c) v.push_back(net.w2(r, c));
  for (Index i = 0; i < net.b2.size(); ++i) v.push_back(net.b2[i]);
  return v;
}

MlpNet unflatten_net(const std::vector<Real>& v, Index in, Index hidden, Index out) {
  const std::size_t expected =
      static_cast<std::size_t>(hidden * in + hidden + out * hidden + out);
  if (v.size() != expected) throw ValidationError("prior file: net weight count mismatch");
  MlpNet net;
  net.w1.resize(hidden, in);
  net.b1.resize(hidden);
  net.w2.resize(out, hidden);
  net.b2.resize(out);
  std::size_t k = 0;
  for (Index r = 0; r < hidden; ++r)
    for (Index c = 0; c < in; ++c) net.w1(r, c) = v[k++];
  for (Index i = 0; i < hidden; ++i) net.b1[i] = v[k++];
  for (Index r = 0; r < out; ++r)
    for (Index c = 0; c < hidden; ++c) net.w2(r, c) = v[k++];
  for (Index i = 0; i < out; ++i) net.b2[i] = v[k++];
  return net;
}

struct TokenReader {
  std::istringstream in;

  explicit TokenReader(std::string text) : in(std::move(text)) {}

  std::string word(const char* what) {
    std::string s;
    if (!(in >> s)) throw ValidationError(std::string("prior file: missing ") + what);
    return s;
  }
  void expect(const char* keyword) {
    const std::string s = word(keyword);
    if (s != keyword)
      throw ValidationError("prior file: expected '" + std::string(keyword) + "', got '" + s + "'");
  }
  long integer(const char* what) {
    const std::string s = word(what);
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("prior file: bad integer for ") + what + ": " + s);
    }
  }
  Real real(const char* what) {
    const std::string s = word(what);
    try {
      std::size_t pos = 0;
      const Real v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("prior file: bad number for ") + what + ": " + s);
    }
  }
};

}  // namespace

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_prior(const std::string& path, const DiffusionPrior& prior) {
  prior.validate();
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open prior file for writing: " + path);
  out << "dtsprior " << kFormatVersion << '\n';
  out << "d " << prior.d << '\n';
  out << "L " << prior.L << '\n';
  for (int l = 1; l <= prior.L; ++l) {
    const LinkFn& link = prior.links[l - 1];
    out << "layer " << l << '\n';
    out << "kind " << kind_name(link.kind) << '\n';
    out << "sigma2 " << format_real(isotropic_sigma2(prior.covs[l - 1], "layer covariance"))
        << '\n';
    switch (link.kind) {
      case LinkFn::Kind::kLinear: {
        std::vector<Real> v;
        v.reserve(link.w.size());
        for (Index r = 0; r < link.w.rows(); ++r)
          for (Index c = 0; c < link.w.cols(); ++c) v.push_back(link.w(r, c));
        write_block(out, "weights", v);
        break;
      }
      case LinkFn::Kind::kMlpDirect:
        out << "hidden " << link.net.hidden() << '\n';
        write_block(out, "weights", flatten_net(link.net));
        break;
      case LinkFn::Kind::kDdpmEps:
        out << "beta " << format_real(link.beta) << '\n';
        out << "hidden " << link.net.hidden() << '\n';
        write_block(out, "weights", flatten_net(link.net));
        break;
    }
  }
  out << "top_sigma2 " << format_real(isotropic_sigma2(prior.top_cov, "top covariance")) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

DiffusionPrior load_prior(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open prior file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  TokenReader r(buffer.str());

  r.expect("dtsprior");
  const long version = r.integer("version");
  if (version != kFormatVersion)
    throw ValidationError("prior file: unsupported version " + std::to_string(version));
  r.expect("d");
  const Index d = r.integer("d");
  r.expect("L");
  const int L = static_cast<int>(r.integer("L"));
  if (d < 1 || L < 1) throw ValidationError("prior file: d and L must be positive");

  DiffusionPrior prior;
  prior.d = d;
  prior.L = L;
  std::vector<Real> betas(L, 0.0);
  for (int l = 1; l <= L; ++l) {
    r.expect("layer");
    if (r.integer("layer index") != l) throw ValidationError("prior file: layers out of order");
    r.expect("kind");
    const std::string kind = r.word("kind");
    r.expect("sigma2");
    const Real sigma2 = r.real("sigma2");
    if (sigma2 <= 0) throw ValidationError("prior file: sigma2 must be positive");
    prior.covs.push_back(Covariance::isotropic(d, sigma2));

    Real beta = 0.0;
    Index hidden = 0;
    if (kind == "ddpm_eps") {
      r.expect("beta");
      beta = r.real("beta");
      betas[l - 1] = beta;
    }
    if (kind == "mlp_direct" || kind == "ddpm_eps") {
      r.expect("hidden");
      hidden = r.integer("hidden");
      if (hidden < 1) throw ValidationError("prior file: hidden width must be positive");
    }
    std::vector<Real> weights;
    if (kind == "linear" || kind == "mlp_direct" || kind == "ddpm_eps") {
      r.expect("weights");
      const long count = r.integer("weight count");
      weights.resize(count);
      for (long i = 0; i < count; ++i) weights[i] = r.real("weight");
    } else {
      throw ValidationError("prior file: unknown link kind '" + kind + "'");
    }

    if (kind == "linear") {
      if (static_cast<Index>(weights.size()) != d * d)
        throw ValidationError("prior file: linear weight count mismatch");
      Mat w(d, d);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) w(i, j) = weights[i * d + j];
      prior.links.push_back(LinkFn::linear(std::move(w), l, L));
    } else {
      MlpNet net = unflatten_net(weights, d + 1, hidden, d);
      LinkFn link;
      link.kind = kind == "mlp_direct" ? LinkFn::Kind::kMlpDirect : LinkFn::Kind::kDdpmEps;
      link.net = std::move(net);
      link.level = l;
      link.levels_total = L;
      link.beta = beta;
      prior.links.push_back(std::move(link));
    }
  }
  r.expect("top_sigma2");
  const Real top_sigma2 = r.real("top_sigma2");
  if (top_sigma2 <= 0) throw ValidationError("prior file: top_sigma2 must be positive");
  prior.top_cov = Covariance::isotropic(d, top_sigma2);

  // Reconstruct alpha / alpha-bar for the reverse-mean links from the stored
  // betas (non-ddpm layers contribute a factor of 1).
  Real abar = 1.0;
  for (int l = 1; l <= L; ++l) {
    const Real alpha = 1.0 - betas[l - 1];
    abar *= alpha;
    LinkFn& link = prior.links[l - 1];
    if (link.kind == LinkFn::Kind::kDdpmEps) {
      link.alpha = alpha;
      link.alpha_bar = abar;
    }
  }
  prior.validate();
  return prior;
}

void save_samples_csv(const std::string& path, const Mat& samples) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open samples file for writing: " + path);
  for (Index c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << "dim" << c;
  out << '\n';
  for (Index r = 0; r < samples.rows(); ++r) {
    for (Index c = 0; c < samples.cols(); ++c)
      out << (c ? "," : "") << format_real(samples(r, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Mat load_samples_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open samples file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("samples file is empty: " + path);
  Index d = line.empty() ? 0 : 1;
  for (char ch : line)
    if (ch == ',') ++d;
  if (d < 1) throw ValidationError("samples file has no columns: " + path);

  std::vector<Vec> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Vec row(d);
    std::stringstream ss(line);
    std::string cell;
    Index c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= d)
        throw ValidationError("samples file: too many columns at line " + std::to_string(line_no));
      try {
        std::size_t pos = 0;
        row[c] = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError("samples file: bad number at line " + std::to_string(line_no));
      }
      ++c;
    }
    if (c != d)
      throw ValidationError("samples file: wrong column count at line " + std::to_string(line_no));
    if (!row.allFinite())
      throw ValidationError("samples file: non-finite value at line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("samples file has no data rows: " + path);
  Mat samples(static_cast<Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) samples.row(static_cast<Index>(i)) = rows[i];
  return samples;
}

void save_loss_csv(const std::string& path, const std::vector<Real>& losses) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open loss file for writing: " + path);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i)
    out << i << ',' << format_real(losses[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace dts
