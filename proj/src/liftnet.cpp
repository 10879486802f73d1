#include "raylift/liftnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace raylift {

namespace {

constexpr int kCenter = kWindowFrames / 2;
constexpr double kThetaScale = 0.7;   // typical pitch magnitude, keeps inputs O(1)
constexpr double kHeightScale = 3.0;  // typical camera height in meters
constexpr double kSigmaFloor = 1e-6;  // structurally constant dims keep unit scale
constexpr long kEvalChunk = 256;

const double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<long> shape_dims(const ad::Shape& s) {
  std::vector<long> v(size_t(s.nd));
  for (int i = 0; i < s.nd; ++i) v[size_t(i)] = s[i];
  return v;
}

// ---- parameter table ----

struct ParamSpec {
  std::string name;
  ad::Shape shape;
  long fan_in = 0;        // 0 means constant init
  double init_const = 0;  // used when fan_in is 0
};

// registration order is the init stream order and the checkpoint layout
std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  std::vector<ParamSpec> specs;
  const long C = cfg.channels;
  const long E = cfg.embed_dim;
  const long J = cfg.joints.joints();
  const long G = long(cfg.joints.groups.size());

  auto weight = [&](std::string name, ad::Shape s, long fan) {
    specs.push_back({std::move(name), s, fan, 0});
  };
  auto fill = [&](std::string name, ad::Shape s, double v) {
    specs.push_back({std::move(name), s, 0, v});
  };
  auto bn = [&](const std::string& prefix, long width) {
    fill(prefix + ".gamma", ad::Shape::of({width}), 1);
    fill(prefix + ".beta", ad::Shape::of({width}), 0);
  };

  for (const char* head : {"pose", "traj"}) {
    const std::string h = head;
    const long out = h == "pose" ? 3 * J : 3;
    for (long gi = 0; gi < G; ++gi) {
      const std::string g = h + ".g" + std::to_string(gi);
      const long cin = 9 * long(cfg.joints.groups[size_t(gi)].size());
      weight(g + ".conv1.w", ad::Shape::of({C, cin, 3}), cin * 3);
      fill(g + ".conv1.b", ad::Shape::of({C}), 0);
      bn(g + ".bn1", C);
      weight(g + ".conv2.w", ad::Shape::of({C, C, 3}), C * 3);
      fill(g + ".conv2.b", ad::Shape::of({C}), 0);
      bn(g + ".bn2", C);
    }
    weight(h + ".global.linear.w", ad::Shape::of({3 * J, C}), 3 * J);
    fill(h + ".global.linear.b", ad::Shape::of({C}), 0);
    bn(h + ".global.bn", C);
    weight(h + ".fusion.linear.w", ad::Shape::of({(G + 1) * C, C}), (G + 1) * C);
    fill(h + ".fusion.linear.b", ad::Shape::of({C}), 0);
    bn(h + ".fusion.bn", C);
    const long hin = C + (cfg.camera_embedding ? E : 0);
    weight(h + ".head.linear1.w", ad::Shape::of({hin, C}), hin);
    fill(h + ".head.linear1.b", ad::Shape::of({C}), 0);
    bn(h + ".head.bn", C);
    weight(h + ".head.linear2.w", ad::Shape::of({C, out}), C);
    fill(h + ".head.linear2.b", ad::Shape::of({out}), 0);
  }
  if (cfg.camera_embedding) {
    // no batchnorm here: the conditioning pair is constant per camera, so a
    // batch holds only a handful of distinct values and batch statistics
    // would couple unrelated samples through their rigs
    weight("embed.linear1.w", ad::Shape::of({2, E}), 2);
    fill("embed.linear1.b", ad::Shape::of({E}), 0);
    weight("embed.linear2.w", ad::Shape::of({E, E}), E);
    fill("embed.linear2.b", ad::Shape::of({E}), 0);
  }
  return specs;
}

void add_buffer(LiftModel& m, const std::string& name, long n, double v) {
  m.buffers.push_back({name, std::vector<double>(size_t(n), v)});
}

std::unordered_map<std::string, size_t> param_index(const LiftModel& m) {
  std::unordered_map<std::string, size_t> idx;
  idx.reserve(m.params.size());
  for (size_t i = 0; i < m.params.size(); ++i) idx[m.params[i].name] = i;
  return idx;
}

// ---- graph construction ----

void check_input(const LiftModel& m, const ModelInput& in) {
  expect(in.mode == m.config.input_mode, ErrorCode::ModeMismatch,
         std::string("model expects ") + input_mode_name(m.config.input_mode) + " input, got " +
             input_mode_name(in.mode));
  expect(int(in.frames.size()) == kWindowFrames, ErrorCode::ShapeMismatch,
         "window must hold " + std::to_string(kWindowFrames) + " frames, got " +
             std::to_string(in.frames.size()));
  const long J = m.config.joints.joints();
  for (const auto& f : in.frames)
    expect(f.rows() == J && f.cols() == 3, ErrorCode::ShapeMismatch,
           "frame must be " + std::to_string(J) + "x3");
  if (m.config.camera_embedding) in.cam.validate();
}

// input encodings packed into flat row-major tensors, one per network entry
struct NetInputs {
  long B = 0;
  std::vector<std::vector<double>> group;  // [B, 9*Jg, T] each
  std::vector<double> global_center;       // [B, 3J]
  std::vector<double> embed;               // [B, 2]
};

NetInputs pack_inputs(const ModelConfig& cfg, const std::vector<ModelInput>& inputs) {
  const JointSet& js = cfg.joints;
  const long J = js.joints();
  const long B = long(inputs.size());
  const int root = js.root;

  NetInputs x;
  x.B = B;
  x.group.resize(js.groups.size());
  for (size_t gi = 0; gi < js.groups.size(); ++gi)
    x.group[gi].assign(size_t(B) * 9 * js.groups[gi].size() * kWindowFrames, 0);
  x.global_center.assign(size_t(B) * 3 * J, 0);
  x.embed.assign(size_t(B) * 2, 0);

  for (long b = 0; b < B; ++b) {
    const ModelInput& in = inputs[size_t(b)];
    const auto& center = in.frames[kCenter];
    for (size_t gi = 0; gi < js.groups.size(); ++gi) {
      const auto& members = js.groups[gi];
      const long cin = 9 * long(members.size());
      auto at = [&, cin](long ch, long t) -> double& {
        return x.group[gi][size_t((b * cin + ch) * kWindowFrames + t)];
      };
      for (size_t jl = 0; jl < members.size(); ++jl) {
        const int j = members[jl];
        for (long t = 0; t < kWindowFrames; ++t) {
          const auto& frame = in.frames[size_t(t)];
          // 9 channels per joint: raw, root-relative, minus the joint's
          // center-frame position
          for (long d = 0; d < 3; ++d) {
            at(long(jl) * 9 + d, t) = frame(j, d);
            at(long(jl) * 9 + 3 + d, t) = frame(j, d) - frame(root, d);
            at(long(jl) * 9 + 6 + d, t) = frame(j, d) - center(j, d);
          }
        }
      }
    }
    for (long j = 0; j < J; ++j)
      for (long d = 0; d < 3; ++d) x.global_center[size_t((b * J + j) * 3 + d)] = center(j, d);
    x.embed[size_t(b * 2)] = in.cam.theta / kThetaScale;
    x.embed[size_t(b * 2 + 1)] = in.cam.h / kHeightScale;
  }
  return x;
}

struct GraphRefs {
  ad::Tape<double>& tape;
  LiftModel& m;
  const std::vector<int>& nodes;
  const std::unordered_map<std::string, size_t>& index;

  int P(const std::string& name) const { return nodes[index.at(name)]; }
  std::vector<double>* buf(const std::string& name) { return &model_buffer(m, name); }
};

int linear_block(GraphRefs& g, int x, const std::string& prefix, const std::string& bn_prefix,
                 double dropout) {
  int y = g.tape.add_bias(g.tape.matmul(x, g.P(prefix + ".w")), g.P(prefix + ".b"));
  y = g.tape.batchnorm1d(y, g.P(bn_prefix + ".gamma"), g.P(bn_prefix + ".beta"),
                         g.buf(bn_prefix + ".mean"), g.buf(bn_prefix + ".var"));
  return g.tape.dropout(g.tape.relu(y), dropout);
}

int build_embedding(GraphRefs& g, const std::vector<double>& values, long B, double dropout) {
  int e = g.tape.constant(ad::Shape::of({B, 2}), values);
  auto layer = [&](int x, const std::string& prefix) {
    int y = g.tape.add_bias(g.tape.matmul(x, g.P(prefix + ".w")), g.P(prefix + ".b"));
    return g.tape.dropout(g.tape.relu(y), dropout);
  };
  e = layer(e, "embed.linear1");
  return layer(e, "embed.linear2");
}

struct NetOutputs {
  int pose = -1;  // [B, 3J]
  int traj = -1;  // [B, 3]
};

NetOutputs build_network(ad::Tape<double>& tape, LiftModel& m, const std::vector<int>& nodes,
                         const std::unordered_map<std::string, size_t>& index, const NetInputs& x,
                         bool training) {
  tape.training = training;
  GraphRefs g{tape, m, nodes, index};
  const ModelConfig& cfg = m.config;
  const long C = cfg.channels;
  const long J = cfg.joints.joints();
  const long B = x.B;
  const double p = cfg.dropout;

  int emb = cfg.camera_embedding ? build_embedding(g, x.embed, B, p) : -1;

  auto head = [&](const std::string& h, long out_dim) {
    std::vector<int> parts;
    for (size_t gi = 0; gi < cfg.joints.groups.size(); ++gi) {
      const std::string gp = h + ".g" + std::to_string(gi);
      const long cin = 9 * long(cfg.joints.groups[gi].size());
      int t = tape.constant(ad::Shape::of({B, cin, kWindowFrames}), x.group[gi]);
      t = tape.temporal_conv1d(t, g.P(gp + ".conv1.w"), g.P(gp + ".conv1.b"), 1);
      t = tape.batchnorm1d(t, g.P(gp + ".bn1.gamma"), g.P(gp + ".bn1.beta"),
                           g.buf(gp + ".bn1.mean"), g.buf(gp + ".bn1.var"));
      t = tape.dropout(tape.relu(t), p);
      t = tape.temporal_conv1d(t, g.P(gp + ".conv2.w"), g.P(gp + ".conv2.b"), 3);
      t = tape.batchnorm1d(t, g.P(gp + ".bn2.gamma"), g.P(gp + ".bn2.beta"),
                           g.buf(gp + ".bn2.mean"), g.buf(gp + ".bn2.var"));
      t = tape.dropout(tape.relu(t), p);
      parts.push_back(tape.reshape(t, ad::Shape::of({B, C})));
    }
    int gl = tape.constant(ad::Shape::of({B, 3 * J}), x.global_center);
    parts.push_back(linear_block(g, gl, h + ".global.linear", h + ".global.bn", p));

    int f = tape.concat(parts, 1);
    f = linear_block(g, f, h + ".fusion.linear", h + ".fusion.bn", p);
    if (emb >= 0) f = tape.concat({f, emb}, 1);
    f = linear_block(g, f, h + ".head.linear1", h + ".head.bn", p);
    f = tape.add_bias(tape.matmul(f, g.P(h + ".head.linear2.w")), g.P(h + ".head.linear2.b"));

    // undo output standardization inside the graph so the loss sees meters
    const auto& mu = model_buffer(m, "std." + h + ".mu");
    const auto& sigma = model_buffer(m, "std." + h + ".sigma");
    std::vector<double> mu_t(size_t(B) * size_t(out_dim));
    std::vector<double> sg_t(size_t(B) * size_t(out_dim));
    for (long b = 0; b < B; ++b)
      for (long i = 0; i < out_dim; ++i) {
        mu_t[size_t(b * out_dim + i)] = mu[size_t(i)];
        sg_t[size_t(b * out_dim + i)] = sigma[size_t(i)];
      }
    f = tape.mul(f, tape.constant(ad::Shape::of({B, out_dim}), sg_t));
    return tape.add(f, tape.constant(ad::Shape::of({B, out_dim}), mu_t));
  };

  NetOutputs out;
  out.pose = head("pose", 3 * J);
  out.traj = head("traj", 3);
  return out;
}

// leaves for every parameter, in registration order
std::vector<int> make_leaves(ad::Tape<double>& tape, const LiftModel& m, bool requires_grad) {
  std::vector<int> nodes;
  nodes.reserve(m.params.size());
  for (const auto& p : m.params) nodes.push_back(tape.leaf(p.shape, p.value, requires_grad));
  return nodes;
}

// ---- flip augmentation ----

ModelInput flip_input(const ModelInput& in, const JointSet& js) {
  ModelInput out = in;
  for (auto& f : out.frames) {
    Pose3D p;
    p.points = f;
    f = horizontal_flip(p, js).points;
  }
  return out;
}

void flip_targets(Eigen::Matrix<double, Eigen::Dynamic, 3>& rel, Eigen::Vector3d& root,
                  const JointSet& js) {
  Pose3D p;
  p.points = rel;
  rel = horizontal_flip(p, js).points;
  root.x() = -root.x();
}

ForwardResult unflip_result(ForwardResult r, const JointSet& js) {
  Pose3D p;
  p.points = r.relative;
  r.relative = horizontal_flip(p, js).points;
  r.root.x() = -r.root.x();
  return r;
}

// batched eval-mode pass; returns one ForwardResult per input
std::vector<ForwardResult> forward_many(const LiftModel& m, const std::vector<ModelInput>& inputs) {
  // eval mode never writes the batchnorm buffers, so the const view is safe
  LiftModel& mm = const_cast<LiftModel&>(m);
  const long J = m.config.joints.joints();
  auto index = param_index(m);
  std::vector<ForwardResult> out(inputs.size());

  for (size_t base = 0; base < inputs.size(); base += size_t(kEvalChunk)) {
    const size_t n = std::min(size_t(kEvalChunk), inputs.size() - base);
    std::vector<ModelInput> chunk(inputs.begin() + long(base), inputs.begin() + long(base + n));
    for (const auto& in : chunk) check_input(m, in);

    ad::Tape<double> tape(0);
    std::vector<int> nodes = make_leaves(tape, mm, false);
    NetOutputs net = build_network(tape, mm, nodes, index, pack_inputs(m.config, chunk), false);
    const auto& pose = tape.val(net.pose);
    const auto& traj = tape.val(net.traj);
    for (size_t b = 0; b < n; ++b) {
      ForwardResult& r = out[base + b];
      r.frame = native_frame(m.config.input_mode);
      r.relative.resize(J, 3);
      for (long j = 0; j < J; ++j)
        for (long d = 0; d < 3; ++d) r.relative(j, d) = pose[(b * size_t(J) + size_t(j)) * 3 + size_t(d)];
      for (long d = 0; d < 3; ++d) r.root(d) = traj[b * 3 + size_t(d)];
    }
  }
  return out;
}

std::vector<ForwardResult> forward_many_tta(const LiftModel& m,
                                            const std::vector<ModelInput>& inputs) {
  std::vector<ModelInput> flipped;
  flipped.reserve(inputs.size());
  for (const auto& in : inputs) flipped.push_back(flip_input(in, m.config.joints));
  std::vector<ForwardResult> plain = forward_many(m, inputs);
  std::vector<ForwardResult> mirror = forward_many(m, flipped);
  for (size_t i = 0; i < plain.size(); ++i) {
    ForwardResult un = unflip_result(mirror[i], m.config.joints);
    plain[i].relative = 0.5 * (plain[i].relative + un.relative);
    plain[i].root = 0.5 * (plain[i].root + un.root);
  }
  return plain;
}

Pose3D assemble_world(const LiftModel& m, const ForwardResult& r, const CameraExtrinsics& extr) {
  Pose3D native;
  native.points = r.relative;
  native.points.rowwise() += r.root.transpose();
  native.frame = r.frame;
  native.root = m.config.joints.root;
  if (r.frame == Frame::NCS) return unnormalize(native, extr, build_ncs(extr));
  return camera_to_world(native, extr);
}

void check_dataset(const LiftModel& m, const Dataset& ds) {
  expect(ds.joints.name == m.config.joints.name, ErrorCode::JointSetMismatch,
         "dataset joint set " + ds.joints.name + " vs model " + m.config.joints.name);
  expect(!ds.records.empty(), ErrorCode::InvalidArgument, "dataset has no records");
}

}  // namespace

// ---- names and small types ----

const char* input_mode_name(InputMode m) {
  switch (m) {
    case InputMode::Pixel: return "pixel";
    case InputMode::RayCCS: return "ray-ccs";
    case InputMode::RayNCS: return "ray-ncs";
  }
  return "?";
}

InputMode input_mode_from_name(const std::string& name) {
  if (name == "pixel") return InputMode::Pixel;
  if (name == "ray-ccs") return InputMode::RayCCS;
  if (name == "ray-ncs") return InputMode::RayNCS;
  throw Error(ErrorCode::InvalidArgument, "unknown input mode '" + name + "'");
}

Frame native_frame(InputMode m) { return m == InputMode::RayNCS ? Frame::NCS : Frame::CCS; }

void CameraEmbeddingInput::validate() const {
  expect(std::isfinite(theta) && std::isfinite(h), ErrorCode::InvalidArgument,
         "camera conditioning inputs must be finite");
  expect(h >= 0, ErrorCode::InvalidArgument, "camera height must be non-negative");
}

void ModelConfig::validate() const {
  joints.validate();
  expect(channels >= 1, ErrorCode::InvalidArgument, "channels must be positive");
  expect(embed_dim >= 1, ErrorCode::InvalidArgument, "embed_dim must be positive");
  expect(dropout >= 0 && dropout < 1, ErrorCode::InvalidArgument, "dropout must lie in [0,1)");
  expect(!joints.groups.empty(), ErrorCode::InvalidArgument, "joint set defines no groups");
}

void TrainConfig::validate() const {
  expect(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be positive");
  expect(batch_size >= 2, ErrorCode::InvalidArgument,
         "batch_size must be at least 2: batchnorm needs more than one row");
  expect(std::isfinite(lr) && lr > 0, ErrorCode::InvalidArgument, "lr must be positive");
  expect(decay > 0 && decay <= 1, ErrorCode::InvalidArgument, "decay must lie in (0,1]");
  expect(precision == "float64", ErrorCode::InvalidArgument,
         "training runs in float64; precision '" + precision + "' is not supported");
  expect(pose_loss_weight >= 0 && traj_loss_weight >= 0, ErrorCode::InvalidArgument,
         "loss weights must be non-negative");
  expect(pose_loss_weight + traj_loss_weight > 0, ErrorCode::InvalidArgument,
         "at least one loss weight must be positive");
}

// ---- model construction ----

LiftModel create_model(const ModelConfig& cfg) {
  cfg.validate();
  LiftModel m;
  m.config = cfg;

  Rng init(cfg.init_seed);
  for (const ParamSpec& s : param_specs(cfg)) {
    Param p;
    p.name = s.name;
    p.shape = s.shape;
    p.value.resize(size_t(s.shape.numel()));
    if (s.fan_in > 0) {
      const double bound = std::sqrt(6.0 / double(s.fan_in));
      for (auto& v : p.value) v = (2 * init.uniform() - 1) * bound;
    } else {
      std::fill(p.value.begin(), p.value.end(), s.init_const);
    }
    m.params.push_back(std::move(p));
  }

  const long C = cfg.channels;
  const long J = cfg.joints.joints();
  for (const char* head : {"pose", "traj"}) {
    const std::string h = head;
    for (size_t gi = 0; gi < cfg.joints.groups.size(); ++gi) {
      const std::string g = h + ".g" + std::to_string(gi);
      add_buffer(m, g + ".bn1.mean", C, 0);
      add_buffer(m, g + ".bn1.var", C, 1);
      add_buffer(m, g + ".bn2.mean", C, 0);
      add_buffer(m, g + ".bn2.var", C, 1);
    }
    add_buffer(m, h + ".global.bn.mean", C, 0);
    add_buffer(m, h + ".global.bn.var", C, 1);
    add_buffer(m, h + ".fusion.bn.mean", C, 0);
    add_buffer(m, h + ".fusion.bn.var", C, 1);
    add_buffer(m, h + ".head.bn.mean", C, 0);
    add_buffer(m, h + ".head.bn.var", C, 1);
  }
  add_buffer(m, "std.pose.mu", 3 * J, 0);
  add_buffer(m, "std.pose.sigma", 3 * J, 1);
  add_buffer(m, "std.traj.mu", 3, 0);
  add_buffer(m, "std.traj.sigma", 3, 1);
  return m;
}

long parameter_count(const LiftModel& m) {
  long n = 0;
  for (const auto& p : m.params) n += p.shape.numel();
  return n;
}

std::vector<double>& model_buffer(LiftModel& m, const std::string& name) {
  for (auto& b : m.buffers)
    if (b.name == name) return b.value;
  throw Error(ErrorCode::InvalidArgument, "model has no buffer '" + name + "'");
}

const std::vector<double>& model_buffer(const LiftModel& m, const std::string& name) {
  return model_buffer(const_cast<LiftModel&>(m), name);
}

// ---- input encodings ----

ModelInput input_from_record(const SampleRecord& rec, const Dataset& ds, InputMode mode) {
  expect(int(rec.rays_ncs.size()) == kWindowFrames, ErrorCode::ShapeMismatch,
         "record window length does not match the model");
  ModelInput in;
  in.mode = mode;
  in.cam = {rec.theta, rec.h};
  in.frames.reserve(size_t(kWindowFrames));
  switch (mode) {
    case InputMode::RayNCS:
      // feed ray directions, not the stored points: subtracting the shared
      // origin (0, -h, 0) keeps the encoding free of camera height, which
      // reaches the model only through the embedding
      for (const auto& r : rec.rays_ncs) {
        Eigen::Matrix<double, Eigen::Dynamic, 3> f = r.points;
        f.col(1).array() += rec.h;
        in.frames.push_back(std::move(f));
      }
      break;
    case InputMode::RayCCS: {
      NcsTransform ncs = build_ncs(ds.camera_by_id(rec.camera_id).extrinsics);
      for (const auto& r : rec.rays_ncs)
        in.frames.push_back(normalized_to_camera_rays(r, ncs).points);
      break;
    }
    case InputMode::Pixel: {
      const double W = ds.width, H = ds.height;
      for (const auto& px : rec.pixels) {
        Eigen::Matrix<double, Eigen::Dynamic, 3> f(px.joints(), 3);
        for (int j = 0; j < px.joints(); ++j) {
          f(j, 0) = (2 * px.points(j, 0) - W) / W;
          f(j, 1) = (2 * px.points(j, 1) - H) / W;
          f(j, 2) = 1.0;
        }
        in.frames.push_back(std::move(f));
      }
      break;
    }
  }
  return in;
}

ModelInput input_from_pixels(const std::vector<Pose2D>& window, const CameraIntrinsics& intr,
                             const CameraExtrinsics& extr, InputMode mode) {
  expect(int(window.size()) == kWindowFrames, ErrorCode::ShapeMismatch,
         "window must hold " + std::to_string(kWindowFrames) + " frames");
  NcsTransform ncs = build_ncs(extr);
  ModelInput in;
  in.mode = mode;
  in.cam = {ncs.theta, ncs.h};
  in.frames.reserve(window.size());
  for (const auto& px : window) {
    switch (mode) {
      case InputMode::Pixel: {
        const double W = intr.width, H = intr.height;
        Eigen::Matrix<double, Eigen::Dynamic, 3> f(px.joints(), 3);
        for (int j = 0; j < px.joints(); ++j) {
          f(j, 0) = (2 * px.points(j, 0) - W) / W;
          f(j, 1) = (2 * px.points(j, 1) - H) / W;
          f(j, 2) = 1.0;
        }
        in.frames.push_back(std::move(f));
        break;
      }
      case InputMode::RayCCS:
        in.frames.push_back(decouple_intrinsics(px, intr).points);
        break;
      case InputMode::RayNCS: {
        // directions from the camera center, as in input_from_record
        Eigen::Matrix<double, Eigen::Dynamic, 3> f =
            camera_to_normalized(decouple_intrinsics(px, intr), ncs).points;
        f.rowwise() -= ncs.t_c2n.transpose();
        in.frames.push_back(std::move(f));
        break;
      }
    }
  }
  return in;
}

void record_targets(const SampleRecord& rec, const Dataset& ds, InputMode mode,
                    Eigen::Matrix<double, Eigen::Dynamic, 3>& relative, Eigen::Vector3d& root) {
  Pose3D native = native_frame(mode) == Frame::NCS
                      ? rec.gt_ncs
                      : world_to_camera(rec.gt_wcs, ds.camera_by_id(rec.camera_id).extrinsics);
  root = native.points.row(ds.joints.root).transpose();
  relative = native.points;
  relative.rowwise() -= root.transpose();
}

// ---- forward paths ----

ForwardResult forward(const LiftModel& m, const ModelInput& in) {
  check_input(m, in);
  return forward_many(m, {in})[0];
}

ForwardResult forward_tta(const LiftModel& m, const ModelInput& in) {
  check_input(m, in);
  return forward_many_tta(m, {in})[0];
}

std::vector<double> embed_camera(const LiftModel& m, const CameraEmbeddingInput& cam) {
  expect(m.config.camera_embedding, ErrorCode::InvalidArgument,
         "model was built without camera conditioning");
  cam.validate();
  LiftModel& mm = const_cast<LiftModel&>(m);
  auto index = param_index(m);
  ad::Tape<double> tape(0);
  tape.training = false;
  std::vector<int> nodes = make_leaves(tape, mm, false);
  GraphRefs g{tape, mm, nodes, index};
  int e = build_embedding(g, {cam.theta / kThetaScale, cam.h / kHeightScale}, 1,
                          m.config.dropout);
  return tape.val(e);
}

double loss_value(const ForwardResult& pred, const ForwardResult& gt, double pose_weight,
                  double traj_weight) {
  expect(pred.relative.rows() == gt.relative.rows(), ErrorCode::ShapeMismatch,
         "loss joint counts differ");
  const double pose = (pred.relative - gt.relative).rowwise().norm().mean();
  const double traj = (pred.root - gt.root).norm();
  return pose_weight * pose + traj_weight * traj;
}

int build_loss_graph(ad::Tape<double>& tape, LiftModel& m, const std::vector<int>& param_nodes,
                     const TrainBatch& batch, double pose_weight, double traj_weight,
                     bool training) {
  const long B = long(batch.inputs.size());
  expect(B > 0, ErrorCode::InvalidArgument, "empty batch");
  expect(batch.gt_relative.size() == size_t(B) && batch.gt_root.size() == size_t(B),
         ErrorCode::ShapeMismatch, "batch targets do not match inputs");
  expect(param_nodes.size() == m.params.size(), ErrorCode::ShapeMismatch,
         "one leaf per parameter required");
  const long J = m.config.joints.joints();
  for (const auto& in : batch.inputs) check_input(m, in);
  for (const auto& rel : batch.gt_relative)
    expect(rel.rows() == J, ErrorCode::ShapeMismatch, "target joint count mismatch");

  auto index = param_index(m);
  NetOutputs net = build_network(tape, m, param_nodes, index, pack_inputs(m.config, batch.inputs),
                                 training);

  std::vector<double> gt_pose(size_t(B) * 3 * size_t(J));
  std::vector<double> gt_root(size_t(B) * 3);
  for (long b = 0; b < B; ++b) {
    const auto& rel = batch.gt_relative[size_t(b)];
    for (long j = 0; j < J; ++j)
      for (long d = 0; d < 3; ++d) gt_pose[size_t((b * J + j) * 3 + d)] = rel(j, d);
    for (long d = 0; d < 3; ++d) gt_root[size_t(b * 3 + d)] = batch.gt_root[size_t(b)](d);
  }

  int pd = tape.sub(net.pose, tape.constant(ad::Shape::of({B, 3 * J}), gt_pose));
  int pose_term = tape.mean(tape.l2_norm_per_row(tape.reshape(pd, ad::Shape::of({B * J, 3}))));
  int rd = tape.sub(net.traj, tape.constant(ad::Shape::of({B, 3}), gt_root));
  int traj_term = tape.mean(tape.l2_norm_per_row(rd));
  return tape.add(tape.scale(pose_term, pose_weight), tape.scale(traj_term, traj_weight));
}

// ---- training ----

std::string TrainLog::csv() const {
  std::string s = "epoch,lr,train_loss,val_mpjpe_mm,val_mrpe_mm\n";
  for (const auto& r : rows) {
    s += std::to_string(r.epoch);
    s += ',';
    s += fmt_double(r.lr);
    s += ',';
    s += fmt_double(r.train_loss);
    s += ',';
    s += fmt_double(r.val_mpjpe_mm);
    s += ',';
    s += fmt_double(r.val_mrpe_mm);
    s += '\n';
  }
  return s;
}

void fit_output_standardization(LiftModel& m, const Dataset& train) {
  check_dataset(m, train);
  const long J = m.config.joints.joints();
  const long n = long(train.records.size());

  Eigen::VectorXd pose_sum = Eigen::VectorXd::Zero(3 * J);
  Eigen::Vector3d root_sum = Eigen::Vector3d::Zero();
  std::vector<Eigen::VectorXd> pose_rows;
  std::vector<Eigen::Vector3d> root_rows;
  pose_rows.reserve(size_t(n));
  root_rows.reserve(size_t(n));
  for (const auto& rec : train.records) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> rel;
    Eigen::Vector3d root;
    record_targets(rec, train, m.config.input_mode, rel, root);
    Eigen::VectorXd flat(3 * J);
    for (long j = 0; j < J; ++j)
      for (long d = 0; d < 3; ++d) flat(j * 3 + d) = rel(j, d);
    pose_sum += flat;
    root_sum += root;
    pose_rows.push_back(std::move(flat));
    root_rows.push_back(root);
  }
  Eigen::VectorXd pose_mu = pose_sum / double(n);
  Eigen::Vector3d root_mu = root_sum / double(n);
  Eigen::VectorXd pose_var = Eigen::VectorXd::Zero(3 * J);
  Eigen::Vector3d root_var = Eigen::Vector3d::Zero();
  for (long i = 0; i < n; ++i) {
    pose_var += (pose_rows[size_t(i)] - pose_mu).cwiseAbs2();
    root_var += (root_rows[size_t(i)] - root_mu).cwiseAbs2();
  }
  pose_var /= double(n);
  root_var /= double(n);

  auto& pmu = model_buffer(m, "std.pose.mu");
  auto& psg = model_buffer(m, "std.pose.sigma");
  for (long i = 0; i < 3 * J; ++i) {
    pmu[size_t(i)] = pose_mu(i);
    psg[size_t(i)] = std::max(std::sqrt(pose_var(i)), kSigmaFloor);
  }
  auto& tmu = model_buffer(m, "std.traj.mu");
  auto& tsg = model_buffer(m, "std.traj.sigma");
  for (long i = 0; i < 3; ++i) {
    tmu[size_t(i)] = root_mu(i);
    tsg[size_t(i)] = std::max(std::sqrt(root_var(i)), kSigmaFloor);
  }
}

TrainLog train_model(LiftModel& m, const Dataset& train, const Dataset* val,
                     const TrainConfig& cfg, int start_epoch) {
  cfg.validate();
  check_dataset(m, train);
  expect(start_epoch >= 0 && start_epoch <= cfg.epochs, ErrorCode::InvalidArgument,
         "start_epoch out of range");
  if (start_epoch == 0) fit_output_standardization(m, train);

  const size_t n = train.records.size();
  const JointSet& js = m.config.joints;
  std::vector<ModelInput> base_inputs(n);
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> base_rel(n);
  std::vector<Eigen::Vector3d> base_root(n);
  for (size_t i = 0; i < n; ++i) {
    base_inputs[i] = input_from_record(train.records[i], train, m.config.input_mode);
    record_targets(train.records[i], train, m.config.input_mode, base_rel[i], base_root[i]);
  }

  TrainLog log;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    // every stream hangs off (seed, epoch) only, so resumed runs reproduce
    // the continuous schedule bit-exactly
    const Rng epoch_base = Rng(cfg.seed).fork(std::uint64_t(epoch));

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    Rng shuffler = epoch_base.fork(0);
    for (size_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffler.below(std::uint32_t(i + 1))]);

    std::vector<char> flip(n, 0);
    Rng flipper = epoch_base.fork(1);
    if (cfg.flip_augmentation)
      for (size_t i = 0; i < n; ++i) flip[i] = flipper.uniform() < 0.5 ? 1 : 0;

    std::vector<std::pair<size_t, size_t>> spans;
    for (size_t b = 0; b < n; b += size_t(cfg.batch_size))
      spans.emplace_back(b, std::min(b + size_t(cfg.batch_size), n));
    if (spans.size() > 1 && spans.back().second - spans.back().first < 2) {
      spans[spans.size() - 2].second = n;  // lone sample cannot feed batchnorm
      spans.pop_back();
    }

    const double lr = cfg.lr * std::pow(cfg.decay, epoch);
    double loss_acc = 0;
    for (size_t bi = 0; bi < spans.size(); ++bi) {
      TrainBatch batch;
      for (size_t pos = spans[bi].first; pos < spans[bi].second; ++pos) {
        const size_t s = order[pos];
        if (flip[pos]) {
          batch.inputs.push_back(flip_input(base_inputs[s], js));
          auto rel = base_rel[s];
          auto root = base_root[s];
          flip_targets(rel, root, js);
          batch.gt_relative.push_back(std::move(rel));
          batch.gt_root.push_back(root);
        } else {
          batch.inputs.push_back(base_inputs[s]);
          batch.gt_relative.push_back(base_rel[s]);
          batch.gt_root.push_back(base_root[s]);
        }
      }

      ad::Tape<double> tape(epoch_base.fork(2 + bi).next_u64());
      std::vector<int> nodes = make_leaves(tape, m, true);
      int loss = build_loss_graph(tape, m, nodes, batch, cfg.pose_loss_weight,
                                  cfg.traj_loss_weight, true);
      const double lv = tape.val(loss)[0];
      expect(std::isfinite(lv), ErrorCode::NonFiniteLoss,
             "non-finite training loss at epoch " + std::to_string(epoch) + " batch " +
                 std::to_string(bi));
      tape.backward(loss);
      for (size_t p = 0; p < m.params.size(); ++p)
        ad::adam_step(m.params[p].value, tape.grad(nodes[p]), m.params[p].adam, lr);
      loss_acc += lv * double(batch.inputs.size());
    }

    EpochRow row{epoch, lr, loss_acc / double(n), kNan, kNan};
    if (val) {
      EvalSummary es = evaluate_model(m, *val);
      row.val_mpjpe_mm = es.mpjpe_mm;
      row.val_mrpe_mm = es.mrpe_mm;
    }
    log.rows.push_back(row);
  }
  return log;
}

// ---- inference and evaluation ----

Pose3D predict_from_record(const LiftModel& m, const SampleRecord& rec, const Dataset& ds,
                           bool tta) {
  ModelInput in = input_from_record(rec, ds, m.config.input_mode);
  ForwardResult r = tta ? forward_tta(m, in) : forward(m, in);
  return assemble_world(m, r, ds.camera_by_id(rec.camera_id).extrinsics);
}

Pose3D predict_absolute(const LiftModel& m, const std::vector<Pose2D>& window,
                        const CameraIntrinsics& intr, const CameraExtrinsics& extr, bool tta) {
  ModelInput in = input_from_pixels(window, intr, extr, m.config.input_mode);
  ForwardResult r = tta ? forward_tta(m, in) : forward(m, in);
  return assemble_world(m, r, extr);
}

EvalSummary evaluate_model(const LiftModel& m, const Dataset& ds, bool tta) {
  check_dataset(m, ds);
  std::vector<ModelInput> inputs;
  inputs.reserve(ds.records.size());
  for (const auto& rec : ds.records)
    inputs.push_back(input_from_record(rec, ds, m.config.input_mode));
  std::vector<ForwardResult> results =
      tta ? forward_many_tta(m, inputs) : forward_many(m, inputs);

  EvalSummary out;
  out.samples.reserve(ds.records.size());
  const int root = ds.joints.root;
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const SampleRecord& rec = ds.records[i];
    const VirtualCamera& cam = ds.camera_by_id(rec.camera_id);
    Pose3D pred = assemble_world(m, results[i], cam.extrinsics);

    ScoredSample s;
    s.score.mpjpe_mm = mpjpe(pred, rec.gt_wcs);
    s.score.abs_mpjpe_mm = abs_mpjpe(pred, rec.gt_wcs);
    s.score.mrpe_mm = mrpe(pred.points.row(root).transpose(),
                           rec.gt_wcs.points.row(root).transpose());
    s.axes = cam.axes;
    s.axes["scale"] = rec.bone_scale;
    out.samples.push_back(std::move(s));

    out.mpjpe_mm += out.samples.back().score.mpjpe_mm;
    out.abs_mpjpe_mm += out.samples.back().score.abs_mpjpe_mm;
    out.mrpe_mm += out.samples.back().score.mrpe_mm;
  }
  const double inv = 1.0 / double(out.samples.size());
  out.mpjpe_mm *= inv;
  out.abs_mpjpe_mm *= inv;
  out.mrpe_mm *= inv;
  return out;
}

// ---- checkpoints ----

void save_checkpoint(const LiftModel& m, const std::string& path,
                     const nlohmann::json& extra_meta) {
  std::vector<ad::NamedTensor<double>> tensors;
  for (const auto& p : m.params) tensors.push_back({"p:" + p.name, shape_dims(p.shape), p.value});
  for (const auto& p : m.params) {
    if (p.adam.m.empty()) continue;
    tensors.push_back({"adam_m:" + p.name, shape_dims(p.shape), p.adam.m});
    tensors.push_back({"adam_v:" + p.name, shape_dims(p.shape), p.adam.v});
  }
  for (const auto& b : m.buffers)
    tensors.push_back({"buf:" + b.name, {long(b.value.size())}, b.value});

  nlohmann::ordered_json meta;
  meta["model"] = {{"joints", m.config.joints.name},
                   {"input_mode", input_mode_name(m.config.input_mode)},
                   {"camera_embedding", m.config.camera_embedding},
                   {"channels", m.config.channels},
                   {"embed_dim", m.config.embed_dim},
                   {"dropout", m.config.dropout},
                   {"init_seed", m.config.init_seed}};
  meta["adam_t"] = m.params.empty() ? 0L : m.params[0].adam.t;
  for (const auto& [k, v] : extra_meta.items()) meta[k] = v;
  ad::save_tensor_manifest<double>(path, tensors, meta);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  auto [tensors, meta] = ad::load_tensor_manifest<double>(path);
  const nlohmann::json& jm = meta.at("model");

  ModelConfig cfg;
  const std::string js = jm.at("joints").get<std::string>();
  if (js == "h36m17") cfg.joints = JointSet::h36m17();
  else if (js == "body14") cfg.joints = JointSet::body14();
  else throw Error(ErrorCode::IoError, "checkpoint names unknown joint set '" + js + "'");
  cfg.input_mode = input_mode_from_name(jm.at("input_mode").get<std::string>());
  cfg.camera_embedding = jm.at("camera_embedding").get<bool>();
  cfg.channels = jm.at("channels").get<int>();
  cfg.embed_dim = jm.at("embed_dim").get<int>();
  cfg.dropout = jm.at("dropout").get<double>();
  cfg.init_seed = jm.at("init_seed").get<std::uint64_t>();

  LoadedCheckpoint out;
  out.model = create_model(cfg);
  out.meta = meta;

  std::unordered_map<std::string, const ad::NamedTensor<double>*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  auto find = [&](const std::string& name) -> const ad::NamedTensor<double>* {
    auto it = by_name.find(name);
    return it == by_name.end() ? nullptr : it->second;
  };

  const long adam_t = meta.value("adam_t", 0L);
  for (auto& p : out.model.params) {
    const auto* t = find("p:" + p.name);
    expect(t != nullptr, ErrorCode::IoError, "checkpoint is missing tensor " + p.name);
    expect(t->shape == shape_dims(p.shape), ErrorCode::ShapeMismatch,
           "checkpoint tensor " + p.name + " has the wrong shape");
    p.value = t->data;
    if (const auto* tm = find("adam_m:" + p.name)) {
      const auto* tv = find("adam_v:" + p.name);
      expect(tv != nullptr, ErrorCode::IoError, "checkpoint moment pair broken for " + p.name);
      expect(tm->data.size() == p.value.size() && tv->data.size() == p.value.size(),
             ErrorCode::ShapeMismatch, "optimizer state size mismatch for " + p.name);
      p.adam.m = tm->data;
      p.adam.v = tv->data;
      p.adam.t = adam_t;
    }
  }
  for (auto& b : out.model.buffers) {
    const auto* t = find("buf:" + b.name);
    expect(t != nullptr, ErrorCode::IoError, "checkpoint is missing buffer " + b.name);
    expect(t->data.size() == b.value.size(), ErrorCode::ShapeMismatch,
           "checkpoint buffer " + b.name + " has the wrong size");
    b.value = t->data;
  }
  return out;
}

// ---- fixed-root-height baseline ----

Eigen::Vector3d rfrh_localize(const RayPose& rays_ncs, int root, double assumed_height) {
  expect(rays_ncs.frame == Frame::NCS, ErrorCode::FrameMismatch,
         "root localization expects level-frame rays");
  expect(root >= 0 && root < rays_ncs.joints(), ErrorCode::InvalidArgument,
         "root joint index out of range");
  expect(std::isfinite(assumed_height) && assumed_height > 0, ErrorCode::InvalidArgument,
         "assumed height must be positive");

  const Eigen::Vector3d o = rays_ncs.origin;
  const Eigen::Vector3d d = rays_ncs.points.row(root).transpose() - o;
  expect(std::abs(d.y()) > tol::kRayParallel, ErrorCode::RayParallel,
         "root ray never reaches the assumed height");
  // y points down, so a root at `assumed_height` above ground sits at
  // Y = -assumed_height
  const double s = (-assumed_height - o.y()) / d.y();
  return o + s * d;
}

}  // namespace raylift
