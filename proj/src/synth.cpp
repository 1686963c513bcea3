// SPDX-License-Identifier: Apache-2.0
#include "irembed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "irembed/corpus.hpp"
#include "irembed/errors.hpp"
#include "irembed/io.hpp"
#include "irembed/numeric.hpp"
#include "irembed/tasks.hpp"

#include <nlohmann/json.hpp>

namespace irembed {

std::string_view to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::Stream: return "stream";
    case KernelFamily::Poly: return "poly";
    case KernelFamily::Transcend: return "transcend";
    case KernelFamily::Branchy: return "branchy";
    case KernelFamily::Reduce: return "reduce";
    case KernelFamily::Stencil: return "stencil";
  }
  return "?";
}

namespace {

struct TypeInfo {
  std::string name;
  int align;
  bool is_float;
  std::string suffix;  // intrinsic suffix
};

TypeInfo type_info(ElemType t) {
  switch (t) {
    case ElemType::F32: return {"float", 4, true, "f32"};
    case ElemType::F64: return {"double", 8, true, "f64"};
    case ElemType::I32: return {"i32", 4, false, ""};
  }
  return {"float", 4, true, "f32"};
}

/// LLVM prints exactly representable FP constants in %e form.
std::string fp_literal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

class Writer {
 public:
  Writer(const KernelSpec& spec) : spec_(spec), t_(type_info(spec.elem)), rng_(spec.seed) {}

  std::string run() {
    const std::string& T = t_.name;
    const bool reduce = spec_.family == KernelFamily::Reduce;
    const bool helper = spec_.family != KernelFamily::Reduce && coin(0.5);
    out_ << "; ModuleID = '" << spec_.name << ".c'\n"
         << "source_filename = \"" << spec_.name << ".c\"\n"
         << "target datalayout = \"e-m:e-p270:32:32-p271:32:32-p272:64:64-i64:64-f80:128-n8:16:32:64-S128\"\n"
         << "target triple = \"x86_64-pc-linux-gnu\"\n\n";
    if (helper) {
      out_ << "define internal " << T << " @" << spec_.name << "_scale(" << T << " noundef %v, " << T
           << " noundef %s) #0 {\n"
           << "entry:\n"
           << "  %r = " << mul() << " " << T << " %v, %s\n"
           << "  ret " << T << " %r\n"
           << "}\n\n";
    }
    const int lo = spec_.family == KernelFamily::Stencil ? 1 : 0;
    out_ << "define dso_local " << (reduce ? T : "void") << " @" << spec_.name
         << "(i32 noundef %n, " << T << "* nocapture noundef readonly %x, " << T
         << "* nocapture noundef %y, " << T << " noundef %a) local_unnamed_addr #0 {\n"
         << "entry:\n"
         << "  %cmp = icmp sgt i32 %n, " << (lo + 1) << "\n"
         << "  br i1 %cmp, label %for.body.preheader, label %for.end\n\n"
         << "for.body.preheader:\n"
         << "  %wide.n = zext i32 %n to i64\n";
    if (lo) out_ << "  %last = add nsw i64 %wide.n, -1\n";
    out_ << "  br label %for.body\n\n";
    latch_ = "for.body";
    out_ << "for.body:\n"
         << "  %i = phi i64 [ " << lo << ", %for.body.preheader ], [ %i.next, %LATCH ]\n";
    if (reduce) out_ << "  %sum = phi " << T << " [ " << zero() << ", %for.body.preheader ], [ %sum.next, %LATCH ]\n";
    out_ << "  %px = getelementptr inbounds " << T << ", " << T << "* %x, i64 %i\n"
         << "  %vx = load " << T << ", " << T << "* %px, align " << t_.align << "\n";
    std::string value = body();
    if (helper) {
      out_ << "  %scaled = call " << T << " @" << spec_.name << "_scale(" << T << " noundef " << value
           << ", " << T << " noundef %a)\n";
      value = "%scaled";
    }
    if (reduce) {
      out_ << "  %sum.next = " << add() << " " << T << " %sum, " << value << "\n";
    } else {
      out_ << "  %py = getelementptr inbounds " << T << ", " << T << "* %y, i64 %i\n"
           << "  store " << T << " " << value << ", " << T << "* %py, align " << t_.align << "\n";
    }
    out_ << "  %i.next = add nuw nsw i64 %i, 1\n"
         << "  %done = icmp eq i64 %i.next, " << (lo ? "%last" : "%wide.n") << "\n"
         << "  br i1 %done, label %for.end, label %for.body\n\n"
         << "for.end:\n";
    if (reduce) {
      out_ << "  %res = phi " << T << " [ " << zero() << ", %entry ], [ %sum.next, %LATCH ]\n"
           << "  ret " << T << " %res\n";
    } else {
      out_ << "  ret void\n";
    }
    out_ << "}\n\n";
    for (const auto& d : declares_) out_ << d << "\n";
    if (!declares_.empty()) out_ << "\n";
    out_ << "attributes #0 = { nounwind uwtable }\n";
    std::string text = out_.str();
    for (std::size_t p; (p = text.find("LATCH")) != std::string::npos;) text.replace(p, 5, latch_);
    return text;
  }

 private:
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::string zero() const { return t_.is_float ? fp_literal(0.0) : "0"; }
  std::string add() const { return t_.is_float ? "fadd" : "add nsw"; }
  std::string sub() const { return t_.is_float ? "fsub" : "sub nsw"; }
  std::string mul() const { return t_.is_float ? "fmul" : "mul nsw"; }
  std::string constant() {
    return t_.is_float ? fp_literal(pick(1, 15) / 8.0) : std::to_string(pick(2, 9));
  }

  std::string fresh(const std::string& stem) { return "%" + stem + std::to_string(counter_++); }

  std::string emit(const std::string& op, const std::string& lhs, const std::string& rhs,
                   const std::string& stem) {
    const std::string v = fresh(stem);
    out_ << "  " << v << " = " << op << " " << t_.name << " " << lhs << ", " << rhs << "\n";
    return v;
  }

  std::string load_at(const std::string& offset) {
    const std::string& T = t_.name;
    const std::string idx = fresh("idx"), p = fresh("p"), v = fresh("ld");
    out_ << "  " << idx << " = add nsw i64 %i, " << offset << "\n"
         << "  " << p << " = getelementptr inbounds " << T << ", " << T << "* %x, i64 " << idx << "\n"
         << "  " << v << " = load " << T << ", " << T << "* " << p << ", align " << t_.align << "\n";
    return v;
  }

  std::string intrinsic(const std::string& op, const std::string& arg) {
    const std::string name = "@llvm." + op + "." + t_.suffix;
    const std::string decl = "declare " + t_.name + " " + name + "(" + t_.name + ") #0";
    if (std::find(declares_.begin(), declares_.end(), decl) == declares_.end()) declares_.push_back(decl);
    const std::string v = fresh(op);
    out_ << "  " << v << " = call " << t_.name << " " << name << "(" << t_.name << " " << arg << ")\n";
    return v;
  }

  std::string body() {
    const int w = std::clamp(spec_.work, 1, 8);
    std::string acc = "%vx";
    switch (spec_.family) {
      case KernelFamily::Stream:
        for (int k = 1; k <= w; ++k) acc = emit(add(), acc, load_at(std::to_string(k)), "acc");
        return emit(mul(), acc, "%a", "out");
      case KernelFamily::Poly:
        acc = "%a";
        for (int k = 0; k < w; ++k) {
          const std::string h = emit(mul(), acc, "%vx", "h");
          acc = emit(coin(0.8) ? add() : sub(), h, constant(), "acc");
        }
        return acc;
      case KernelFamily::Transcend: {
        static const char* kOps[] = {"sqrt", "exp", "sin", "cos", "log", "fabs"};
        for (int k = 0; k < w; ++k) {
          const std::string t = intrinsic(kOps[pick(0, 5)], acc);
          acc = emit(mul(), t, k % 2 ? "%a" : constant(), "acc");
        }
        return acc;
      }
      case KernelFamily::Branchy: {
        const std::string& T = t_.name;
        const std::string c = fresh("c");
        out_ << "  " << c << " = " << (t_.is_float ? "fcmp ogt " : "icmp sgt ") << T << " %vx, "
             << constant() << "\n"
             << "  br i1 " << c << ", label %if.then, label %if.else\n\n"
             << "if.then:\n";
        std::string then_v = "%vx";
        for (int k = 0; k < w; ++k) then_v = emit(k % 2 ? add() : mul(), then_v, k % 2 ? constant() : "%a", "t");
        out_ << "  br label %if.end\n\n"
             << "if.else:\n";
        const std::string else_v = emit(sub(), "%vx", "%a", "e");
        out_ << "  br label %if.end\n\n"
             << "if.end:\n";
        const std::string r = fresh("sel");
        out_ << "  " << r << " = phi " << T << " [ " << then_v << ", %if.then ], [ " << else_v
             << ", %if.else ]\n";
        latch_ = "if.end";
        return r;
      }
      case KernelFamily::Reduce:
        for (int k = 0; k < w; ++k) acc = emit(k % 2 ? add() : mul(), acc, k % 2 ? constant() : "%vx", "r");
        return acc;
      case KernelFamily::Stencil: {
        const std::string left = load_at("-1");
        const std::string right = load_at("1");
        acc = emit(add(), left, "%vx", "s");
        acc = emit(add(), acc, right, "s");
        for (int k = 1; k < w; ++k) acc = emit(mul(), acc, constant(), "s");
        return emit(mul(), acc, "%a", "out");
      }
    }
    return acc;
  }

  const KernelSpec& spec_;
  TypeInfo t_;
  std::mt19937_64 rng_;
  std::ostringstream out_;
  std::vector<std::string> declares_;
  std::string latch_;
  int counter_ = 0;
};

std::string csv_double(double v) { return format_double(v); }

}  // namespace

std::string generate_kernel(const KernelSpec& spec) {
  if (spec.name.empty()) throw ValidationError("kernel needs a name");
  if (spec.family == KernelFamily::Transcend && spec.elem == ElemType::I32)
    throw ValidationError("transcendental kernels need a floating-point element type");
  return Writer(spec).run();
}

std::vector<KernelSpec> sample_kernel_specs(std::size_t count, std::uint64_t seed,
                                            const std::string& prefix, int max_work) {
  if (max_work < 1 || max_work > 8) throw ValidationError("max_work must be in 1..8");
  std::mt19937_64 rng(seed);
  std::vector<KernelSpec> out;
  for (std::size_t k = 0; k < count; ++k) {
    KernelSpec s;
    char name[32];
    std::snprintf(name, sizeof name, "%s%03zu", prefix.c_str(), k);
    s.name = name;
    // Round-robin families keep every class populated in small bundles.
    s.family = static_cast<KernelFamily>(k % kNumKernelFamilies);
    const int e = std::uniform_int_distribution<int>(0, 2)(rng);
    s.elem = static_cast<ElemType>(e);
    if (s.family == KernelFamily::Transcend && s.elem == ElemType::I32) s.elem = ElemType::F32;
    s.work = std::uniform_int_distribution<int>(1, max_work)(rng);
    s.seed = mix_seed(seed, k + 1);
    out.push_back(s);
  }
  return out;
}

double kernel_intensity(const KernelSpec& spec) {
  const double w = std::clamp(spec.work, 1, 8);
  double v = 0;
  switch (spec.family) {
    case KernelFamily::Stream: v = -1.0 - 0.1 * w; break;
    case KernelFamily::Poly: v = -0.9 + 0.35 * w; break;
    case KernelFamily::Transcend: v = 0.3 + 0.3 * w; break;
    case KernelFamily::Branchy: v = -1.2; break;
    case KernelFamily::Reduce: v = -0.6; break;
    case KernelFamily::Stencil: v = -0.5 + 0.15 * w; break;
  }
  if (spec.elem == ElemType::F64) v -= 0.3;
  return v;
}

namespace {

/// Coordinates in [0,1] per tunable dimension plus categorical indices.
struct ConfigPoint {
  std::vector<double> coords;
  std::vector<int> cats;
};

std::vector<ConfigPoint> config_points(const TaskSpec& spec) {
  std::vector<ConfigPoint> pts;
  for (std::size_t c = 0; c < spec.label_space.size(); ++c) {
    ConfigPoint p;
    const auto& id = spec.label_space[c];
    if (spec.name == "coarsen") {
      p.coords = {std::log2(std::stod(id)) / 5.0};
    } else if (spec.name == "vectorize") {
      int vf = 0, inter = 0;
      std::sscanf(id.c_str(), "vf%d_if%d", &vf, &inter);
      p.coords = {std::log2(vf) / 6.0, std::log2(inter) / 4.0};
    } else if (spec.name == "omp") {
      const std::size_t power = c / 126, threads = (c / 21) % 6, sched = (c / 7) % 3, chunk = c % 7;
      p.coords = {power / 3.0, threads / 5.0, chunk / 6.0};
      p.cats = {static_cast<int>(sched)};
    } else if (spec.name == "numa") {
      p.coords = {static_cast<double>(c % 7) / 6.0};
      p.cats = {static_cast<int>(c / 7)};
    } else if (spec.name == "cudablock") {
      p.coords = {static_cast<double>(c / 20) / 6.0, static_cast<double>(c % 20) / 19.0};
    } else {
      p.coords = {static_cast<double>(c)};
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

/// A program's preferred point: a code-driven shift plus a per-program
/// offset, so code features explain most but not all of the optimum.
ConfigPoint preference(const KernelSpec& k, std::size_t dims, std::size_t cats, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 0.08);
  const double s = std::tanh(0.6 * kernel_intensity(k));
  ConfigPoint p;
  for (std::size_t d = 0; d < dims; ++d) {
    const double sign = d % 2 ? -1.0 : 1.0;
    p.coords.push_back(std::clamp(0.5 + 0.4 * sign * s + jitter(rng), 0.0, 1.0));
  }
  for (std::size_t c = 0; c < cats; ++c)
    p.cats.push_back(static_cast<int>(k.family) % 3 == static_cast<int>(c) ? 1 : static_cast<int>(k.family) % 3);
  return p;
}

double modeled_runtime(const ConfigPoint& cfg, const ConfigPoint& pref, double base) {
  double cost = 1.0;
  for (std::size_t d = 0; d < cfg.coords.size(); ++d) {
    const double diff = cfg.coords[d] - pref.coords[d];
    cost += 1.5 * diff * diff;
  }
  for (std::size_t c = 0; c < cfg.cats.size(); ++c)
    if (cfg.cats[c] != pref.cats[c % pref.cats.size()]) cost += 0.3;
  return base * cost;
}

}  // namespace

void write_bundle(const BundleOptions& opt, const std::filesystem::path& dir) {
  const TaskSpec spec = task_spec(opt.task);
  if (opt.programs < 2) throw ValidationError("a bundle needs at least two programs");
  if (opt.samples_per_program < 1) throw ValidationError("samples_per_program must be at least 1");
  const bool variants = spec.name == "numa";
  const auto kernels = sample_kernel_specs(opt.programs, opt.seed, opt.task.substr(0, 2));
  std::filesystem::create_directories(dir / "kernels");

  std::vector<ManifestEntry> entries;
  auto add_doc = [&](const KernelSpec& k, const std::string& id) {
    const auto path = dir / "kernels" / (id + ".ll");
    write_file(path, generate_kernel(k));
    entries.push_back({id, path, Split::Pretrain});
  };

  std::mt19937_64 rng(mix_seed(opt.seed, 0xb0d1e));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::string labels = "sample_id,program_id,label";
  for (const auto& a : spec.aux_feature_names) labels += "," + a;
  labels += "\n";
  std::string runtimes = "program_id,config_id,runtime_seconds\n";

  if (spec.name == "devmap") {
    std::uniform_real_distribution<double> log_bytes(10.0, 26.0);
    std::uniform_int_distribution<int> log_wg(5, 10);
    for (const auto& k : kernels) {
      add_doc(k, k.name);
      for (std::size_t s = 0; s < opt.samples_per_program; ++s) {
        const double lt = log_bytes(rng);
        const int lw = log_wg(rng);
        const double score = kernel_intensity(k) + 0.45 * (lt - 18.0) + 0.15 * (lw - 7) +
                             opt.label_noise * noise(rng);
        const std::string sid = k.name + "_s" + std::to_string(s);
        const double bytes = std::round(std::exp2(lt));
        labels += sid + "," + k.name + "," + (score > 0 ? "gpu" : "cpu") + "," + csv_double(bytes) +
                  "," + std::to_string(1 << lw) + "\n";
        const double base = bytes * 1e-9 + 1e-5;
        runtimes += sid + ",cpu," + csv_double(base) + "\n";
        runtimes += sid + ",gpu," + csv_double(base * std::exp(-0.5 * score)) + "\n";
      }
    }
  } else {
    const auto points = config_points(spec);
    const std::size_t dims = points.front().coords.size(), cats = points.front().cats.size();
    for (const auto& k : kernels) {
      const ConfigPoint pref = preference(k, dims, cats, rng);
      const std::size_t n = variants ? opt.samples_per_program : 1;
      for (std::size_t s = 0; s < n; ++s) {
        KernelSpec v = k;
        std::string sid = k.name;
        if (variants) {
          v.seed = mix_seed(k.seed, s + 1);
          sid = k.name + "_v" + std::to_string(s);
          v.name = sid;
        }
        add_doc(v, sid);
        const double base = 1e-3 * std::exp(0.5 * noise(rng));
        std::size_t best = 0;
        std::vector<double> rt;
        for (std::size_t c = 0; c < points.size(); ++c) {
          rt.push_back(modeled_runtime(points[c], pref, base) * std::exp(0.01 * noise(rng)));
          if (rt[c] < rt[best]) best = c;
          runtimes += sid + "," + spec.label_space[c] + "," + csv_double(rt[c]) + "\n";
        }
        if (spec.default_baseline == "default") {
          const std::size_t mid = points.size() / 2;
          runtimes += sid + ",default," + csv_double(rt[mid] * 1.05) + "\n";
        }
        labels += sid + "," + k.name + "," + spec.label_space[best] + "\n";
      }
    }
  }
  write_manifest(make_manifest(std::move(entries), opt.seed), dir / "manifest.jsonl");
  write_file(dir / "labels.csv", labels);
  write_file(dir / "runtimes.csv", runtimes);
  nlohmann::ordered_json meta{{"task", spec.name},
                              {"programs", opt.programs},
                              {"samples_per_program", opt.samples_per_program},
                              {"seed", opt.seed},
                              {"label_noise", opt.label_noise}};
  write_file(dir / "bundle.json", meta.dump(2) + "\n");
}

void write_toy_corpus(std::size_t count, std::uint64_t seed, const std::filesystem::path& dir,
                      int max_work) {
  std::vector<ManifestEntry> entries;
  for (const auto& k : sample_kernel_specs(count, seed, "toy", max_work)) {
    const auto path = dir / (k.name + ".ll");
    write_file(path, generate_kernel(k));
    entries.push_back({k.name, path, Split::Pretrain});
  }
  write_manifest(make_manifest(std::move(entries), seed), dir / "manifest.jsonl");
}

}  // namespace irembed
