#include "greedytrap/instance_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace greedytrap {

using nlohmann::json;

SchemaError::SchemaError(std::string pointer_, const std::string& what)
    : Error((pointer_.empty() ? std::string("/") : pointer_) + ": " + what), pointer(std::move(pointer_)) {}

const char* kind_name(InstanceKind kind) {
  switch (kind) {
    case InstanceKind::Mab: return "mab";
    case InstanceKind::Cb: return "cb";
    case InstanceKind::Dmso: return "dmso";
    case InstanceKind::Continuum: return "continuum";
  }
  return "?";
}

namespace {

std::string at(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string at(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(at(path, key), "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.contains("numerator") && j.contains("eps")) {
    const json& n = j["numerator"];
    const json& e = j["eps"];
    if (!n.is_number_integer()) throw SchemaError(at(path, "numerator"), "expected an integer");
    if (!e.is_number() || !(e.get<double>() > 0.0)) throw SchemaError(at(path, "eps"), "expected a positive number");
    return static_cast<double>(n.get<std::int64_t>()) * e.get<double>();
  }
  throw SchemaError(path, "expected a number or {numerator, eps}");
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw SchemaError(path, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

std::vector<double> number_list(const json& j, const std::string& path, std::optional<std::size_t> len = {}) {
  array(j, path);
  if (len && j.size() != *len)
    throw SchemaError(path, "expected " + std::to_string(*len) + " entries, got " + std::to_string(j.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i)));
  return out;
}

RewardTable table(const json& j, const std::string& path, std::size_t contexts, std::size_t arms, bool mab) {
  if (mab) return RewardTable::mab(number_list(j, path, arms));
  array(j, path);
  if (j.size() != contexts) throw SchemaError(path, "expected " + std::to_string(contexts) + " rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t x = 0; x < contexts; ++x) rows.push_back(number_list(j[x], at(path, x), arms));
  return RewardTable::from_rows(rows);
}

/// Runs a constructor and turns library errors into schema errors at `path`.
template <class F>
auto wrap(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

std::size_t index_in(const json& j, const std::string& path, std::size_t size) {
  const std::size_t i = count(j, path);
  if (i >= size) throw SchemaError(path, "index " + std::to_string(i) + " out of range (size " + std::to_string(size) + ")");
  return i;
}

InstanceFile parse_finite(const json& doc, InstanceKind kind) {
  const bool mab = kind == InstanceKind::Mab;
  const std::size_t K = count(field(doc, "", "arms"), "/arms");
  std::size_t X = 1;
  if (const json* c = optional_field(doc, "contexts")) X = count(*c, "/contexts");
  else if (!mab) throw SchemaError("/contexts", "missing required field");
  if (K == 0) throw SchemaError("/arms", "must be at least 1");
  if (X == 0) throw SchemaError("/contexts", "must be at least 1");
  if (mab && X != 1) throw SchemaError("/contexts", "a mab instance has exactly one context");

  std::vector<double> probs;
  if (const json* p = optional_field(doc, "context_probs")) {
    probs = number_list(*p, "/context_probs", X);
    double total = 0.0;
    for (std::size_t x = 0; x < X; ++x) {
      if (!(probs[x] > 0.0)) throw SchemaError(at("/context_probs", x), "must be positive");
      total += probs[x];
    }
    if (std::abs(total - 1.0) > 1e-12) throw SchemaError("/context_probs", "probabilities must sum to 1 within 1e-12");
  }

  const json& cls_json = array(field(doc, "", "class"), "/class");
  if (cls_json.empty()) throw SchemaError("/class", "function class must be nonempty");
  std::vector<RewardTable> members;
  for (std::size_t i = 0; i < cls_json.size(); ++i)
    members.push_back(wrap(at("/class", i), [&] { return table(cls_json[i], at("/class", i), X, K, mab); }));
  bool unique = false;
  if (const json* u = optional_field(doc, "best_arm_unique")) {
    if (!u->is_boolean()) throw SchemaError("/best_arm_unique", "expected a boolean");
    unique = u->get<bool>();
  }
  FunctionClass cls = wrap("/class", [&] { return FunctionClass(std::move(members), unique); });

  const std::size_t true_index = index_in(field(doc, "", "true_index"), "/true_index", cls.size());
  const double sigma = number(field(doc, "", "sigma"), "/sigma");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw SchemaError("/sigma", "must be finite and >= 0");
  bool bounded = true;
  if (const json* b = optional_field(doc, "bounded_rewards")) {
    if (!b->is_boolean()) throw SchemaError("/bounded_rewards", "expected a boolean");
    bounded = b->get<bool>();
  }

  WarmupSpec warm = uniform_warmup(X, K, 1);
  if (const json* w = optional_field(doc, "warmup")) {
    if (w->is_number()) {
      warm = uniform_warmup(X, K, count(*w, "/warmup"));
    } else if (mab) {
      array(*w, "/warmup");
      if (w->size() != K) throw SchemaError("/warmup", "expected one count per arm");
      for (std::size_t a = 0; a < K; ++a) warm[0][a] = count((*w)[a], at("/warmup", a));
    } else {
      array(*w, "/warmup");
      if (w->size() != X) throw SchemaError("/warmup", "expected one row per context");
      for (std::size_t x = 0; x < X; ++x) {
        const std::string px = at("/warmup", x);
        array((*w)[x], px);
        if ((*w)[x].size() != K) throw SchemaError(px, "expected one count per arm");
        for (std::size_t a = 0; a < K; ++a) warm[x][a] = count((*w)[x][a], at(px, a));
      }
    }
  }

  ProblemInstance inst = wrap("", [&] {
    return ProblemInstance(std::move(cls), true_index, sigma, std::move(probs), std::move(warm), bounded);
  });
  if (const json* g = optional_field(doc, "grid_eps")) {
    const double e = number(*g, "/grid_eps");
    if (!(e > 0.0)) throw SchemaError("/grid_eps", "must be positive");
    inst.grid_eps = e;
  }
  if (const json* d = optional_field(doc, "decoy_hint"))
    inst.decoy_hint = index_in(*d, "/decoy_hint", inst.function_class().size());

  InstanceFile file;
  file.kind = kind;
  file.finite = std::move(inst);
  return file;
}

InstanceFile parse_continuum(const json& doc) {
  const std::size_t K = count(field(doc, "", "arms"), "/arms");
  if (K == 0) throw SchemaError("/arms", "must be at least 1");
  const json& cls_json = field(doc, "", "class");
  const json& par = field(cls_json, "/class", "parametric");
  const json& type = field(par, "/class/parametric", "type");
  if (!type.is_string() || type.get<std::string>() != "l2_ball")
    throw SchemaError("/class/parametric/type", "unsupported parametric class (expected \"l2_ball\")");
  RewardTable center = RewardTable::mab(number_list(field(par, "/class/parametric", "center"), "/class/parametric/center", K));
  const double radius = number(field(par, "/class/parametric", "radius"), "/class/parametric/radius");
  if (!(radius >= 0.0)) throw SchemaError("/class/parametric/radius", "must be >= 0");

  ContinuumInstance c;
  c.cls = l2_ball(center, radius);
  c.truth = RewardTable::mab(number_list(field(doc, "", "truth"), "/truth", K));
  if (!c.cls.contains(c.truth)) throw SchemaError("/truth", "true table lies outside the class");
  c.sigma = number(field(doc, "", "sigma"), "/sigma");
  if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw SchemaError("/sigma", "must be finite and >= 0");
  c.eps = number(field(doc, "", "eps"), "/eps");
  if (!(c.eps > 0.0)) throw SchemaError("/eps", "must be positive");
  if (const json* w = optional_field(doc, "warmup")) {
    if (w->is_number()) {
      c.warmup_per_arm = count(*w, "/warmup");
    } else {
      array(*w, "/warmup");
      if (w->size() != K) throw SchemaError("/warmup", "expected one count per arm");
      c.warmup_per_arm = count((*w)[0], "/warmup/0");
      for (std::size_t a = 1; a < K; ++a)
        if (count((*w)[a], at("/warmup", a)) != c.warmup_per_arm)
          throw SchemaError(at("/warmup", a), "continuum warm-up must use the same count for every arm");
    }
  }
  if (c.warmup_per_arm == 0) throw SchemaError("/warmup", "continuum warm-up needs at least one sample per arm");
  if (const json* d = optional_field(doc, "decoy")) {
    ContinuumDecoy dec;
    dec.decoy = RewardTable::mab(number_list(field(*d, "/decoy", "table"), "/decoy/table", K));
    dec.arm = index_in(field(*d, "/decoy", "arm"), "/decoy/arm", K);
    const std::string why = verify_continuum_decoy(c.truth, dec, c.cls, c.eps);
    if (!why.empty()) throw SchemaError("/decoy", why);
    c.decoy = dec;
  }
  InstanceFile file;
  file.kind = InstanceKind::Continuum;
  file.continuum = std::move(c);
  return file;
}

InstanceFile parse_dmso(const json& doc) {
  const json& oc = field(doc, "", "outcomes");
  std::vector<double> rewards = number_list(field(oc, "/outcomes", "rewards"), "/outcomes/rewards");
  std::vector<std::string> obs;
  const json& oj = array(field(oc, "/outcomes", "observations"), "/outcomes/observations");
  for (std::size_t i = 0; i < oj.size(); ++i) {
    if (!oj[i].is_string()) throw SchemaError(at("/outcomes/observations", i), "expected a string");
    obs.push_back(oj[i].get<std::string>());
  }
  OutcomeSpace space = wrap("/outcomes", [&] { return OutcomeSpace(rewards, obs); });

  const json& models = array(field(field(doc, "", "class"), "/class", "models"), "/class/models");
  if (models.empty()) throw SchemaError("/class/models", "model class must be nonempty");
  std::vector<Model> members;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const std::string pm = at("/class/models", m);
    array(models[m], pm);
    Model M;
    for (std::size_t p = 0; p < models[m].size(); ++p)
      M.dist.push_back(number_list(models[m][p], at(pm, p), space.size()));
    members.push_back(std::move(M));
  }
  std::vector<std::string> names;
  if (const json* pn = optional_field(doc, "policies")) {
    array(*pn, "/policies");
    for (std::size_t i = 0; i < pn->size(); ++i) {
      if (!(*pn)[i].is_string()) throw SchemaError(at("/policies", i), "expected a string");
      names.push_back((*pn)[i].get<std::string>());
    }
  }
  const std::size_t true_index = index_in(field(doc, "", "true_index"), "/true_index", members.size());
  InstanceFile file;
  file.kind = InstanceKind::Dmso;
  file.models = wrap("/class/models", [&] {
    return ModelClass(std::move(space), std::move(members), true_index, std::move(names));
  });
  if (const json* n = optional_field(doc, "n0")) {
    file.n0 = count(*n, "/n0");
    if (*file.n0 == 0) throw SchemaError("/n0", "must be at least 1");
  }
  if (const json* d = optional_field(doc, "decoy_hint")) file.decoy_hint = index_in(*d, "/decoy_hint", file.models->size());
  return file;
}

json encode_value(double v, const std::optional<double>& grid) {
  if (grid) {
    if (auto n = std::llround(v / *grid); static_cast<double>(n) * *grid == v)
      return json{{"numerator", static_cast<std::int64_t>(n)}, {"eps", *grid}};
  }
  return v;
}

json encode_table(const RewardTable& f, bool mab, const std::optional<double>& grid) {
  json out = json::array();
  if (mab) {
    for (double v : f.values()) out.push_back(encode_value(v, grid));
    return out;
  }
  for (std::size_t x = 0; x < f.contexts(); ++x) {
    json row = json::array();
    for (double v : f.row(x)) row.push_back(encode_value(v, grid));
    out.push_back(row);
  }
  return out;
}

json plain_list(const std::vector<double>& v) {
  json out = json::array();
  for (double d : v) out.push_back(d);
  return out;
}

}  // namespace

InstanceFile parse_instance(const json& doc) {
  if (!doc.is_object()) throw SchemaError("", "instance document must be a JSON object");
  const json& ver = field(doc, "", "schema_version");
  if (!ver.is_number_integer() || ver.get<std::int64_t>() != kSchemaVersion)
    throw SchemaError("/schema_version", "unsupported schema version (expected 1)");
  const json& kind = field(doc, "", "kind");
  if (!kind.is_string()) throw SchemaError("/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "mab") return parse_finite(doc, InstanceKind::Mab);
  if (k == "cb") return parse_finite(doc, InstanceKind::Cb);
  if (k == "continuum") return parse_continuum(doc);
  if (k == "dmso") return parse_dmso(doc);
  throw SchemaError("/kind", "unknown kind \"" + k + "\" (expected mab, cb, dmso or continuum)");
}

InstanceFile parse_instance_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_instance(doc);
}

InstanceFile load_instance(const std::string& path) { return parse_instance_text(read_text_file(path)); }

json instance_to_json(const InstanceFile& file) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = kind_name(file.kind);
  switch (file.kind) {
    case InstanceKind::Mab:
    case InstanceKind::Cb: {
      const ProblemInstance& inst = *file.finite;
      const bool mab = file.kind == InstanceKind::Mab;
      const auto& grid = inst.grid_eps;
      doc["arms"] = inst.arms();
      if (!mab) {
        doc["contexts"] = inst.contexts();
        doc["context_probs"] = plain_list(inst.context_probs());
      }
      doc["sigma"] = inst.sigma();
      doc["bounded_rewards"] = inst.bounded_rewards();
      doc["best_arm_unique"] = inst.function_class().best_arm_unique();
      json cls = json::array();
      for (const auto& f : inst.function_class().members()) cls.push_back(encode_table(f, mab, grid));
      doc["class"] = cls;
      doc["true_index"] = inst.true_index();
      json warm = json::array();
      if (mab) {
        for (std::size_t c : inst.warmup()[0]) warm.push_back(c);
      } else {
        for (const auto& row : inst.warmup()) warm.push_back(row);
      }
      doc["warmup"] = warm;
      if (grid) doc["grid_eps"] = *grid;
      if (inst.decoy_hint) doc["decoy_hint"] = *inst.decoy_hint;
      break;
    }
    case InstanceKind::Continuum: {
      const ContinuumInstance& c = *file.continuum;
      if (!c.cls.ball_center) throw Error("only L2-ball continuum classes can be serialized");
      doc["arms"] = c.truth.arms();
      doc["sigma"] = c.sigma;
      doc["bounded_rewards"] = false;
      doc["class"] = {{"parametric",
                       {{"type", "l2_ball"},
                        {"center", plain_list(c.cls.ball_center->values())},
                        {"radius", c.cls.ball_radius}}}};
      doc["truth"] = plain_list(c.truth.values());
      doc["eps"] = c.eps;
      doc["warmup"] = c.warmup_per_arm;
      if (c.decoy) doc["decoy"] = {{"table", plain_list(c.decoy->decoy.values())}, {"arm", c.decoy->arm}};
      break;
    }
    case InstanceKind::Dmso: {
      const ModelClass& m = *file.models;
      doc["outcomes"] = {{"rewards", plain_list(m.space().rewards)}, {"observations", m.space().observations}};
      if (!m.policy_names().empty()) doc["policies"] = m.policy_names();
      json models = json::array();
      for (const auto& M : m.members()) {
        json pol = json::array();
        for (const auto& d : M.dist) pol.push_back(plain_list(d));
        models.push_back(pol);
      }
      doc["class"] = {{"models", models}};
      doc["true_index"] = m.true_index();
      if (file.n0) doc["n0"] = *file.n0;
      if (file.decoy_hint) doc["decoy_hint"] = *file.decoy_hint;
      break;
    }
  }
  return doc;
}

std::string serialize_instance(const InstanceFile& file) { return instance_to_json(file).dump(2) + "\n"; }

void save_instance(const InstanceFile& file, const std::string& path) {
  write_text_file(path, serialize_instance(file));
}

InstanceFile finite_file(ProblemInstance instance) {
  InstanceFile f;
  f.kind = instance.contexts() == 1 ? InstanceKind::Mab : InstanceKind::Cb;
  f.finite = std::move(instance);
  return f;
}

InstanceFile continuum_file(ContinuumInstance instance) {
  InstanceFile f;
  f.kind = InstanceKind::Continuum;
  f.continuum = std::move(instance);
  return f;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace greedytrap
