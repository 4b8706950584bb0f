#include "fdf/engine.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include "fdf/textfmt.hpp"

namespace fdf {

std::string_view to_string(BoxStatus s) {
  switch (s) {
    case BoxStatus::Blocked: return "blocked";
    case BoxStatus::Ready: return "ready";
    case BoxStatus::Done: return "done";
    case BoxStatus::Failed: return "failed";
  }
  return "?";
}

std::uint64_t box_seed(std::uint64_t run_seed, std::string_view box_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : box_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer over the combination
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<std::string> import_mismatch(const Port& port, const LearnedFunction& f) {
  if (!port.import) return "port has no declared signature";
  const ImportSignature& sig = *port.import;
  if (sig.inputs.size() != f.in_widths.size() || sig.outputs.size() != f.out_widths.size())
    return "declared " + std::to_string(sig.inputs.size()) + " -> " +
           std::to_string(sig.outputs.size()) + " slots, artifact has " +
           std::to_string(f.in_widths.size()) + " -> " + std::to_string(f.out_widths.size());
  auto check = [](const std::vector<std::string>& declared,
                  const std::vector<SlotSignature>& have,
                  const char* side) -> std::optional<std::string> {
    for (std::size_t i = 0; i < declared.size(); ++i) {
      if (declared[i].empty() || i >= have.size()) continue;
      const std::string want = strip_exponent(declared[i]);
      const auto& labels = have[i].annotations;
      // Artifacts without annotations carry no evidence either way; widths decide.
      if (labels.empty()) continue;
      if (std::find(labels.begin(), labels.end(), want) == labels.end()) {
        std::string got;
        for (const auto& l : labels) got += (got.empty() ? "" : ", ") + l;
        return std::string(side) + " slot " + std::to_string(i + 1) + " is declared \"" + want +
               "\" but the artifact's type carries {" + got + "}";
      }
    }
    return std::nullopt;
  };
  if (auto m = check(sig.inputs, f.signature.inputs, "input")) return m;
  if (auto m = check(sig.outputs, f.signature.outputs, "output")) return m;
  return std::nullopt;
}

namespace {

struct Slot {
  std::optional<DataBatch> data;
  FunctionPtr func;
};

struct BoxOutcome {
  bool ok = true;
  std::string code;
  std::string message;
  std::vector<std::pair<PortId, Slot>> outputs;
  long ms = 0;
};

class Executor {
 public:
  Executor(const Pipeline& p, const FdfGraph& g, const TypeEnv& env, const Library& lib,
           const RunOptions& opts)
      : p_(p), env_(env), lib_(lib), opts_(opts), slots_(p.port_count()) {
    const std::size_t nb = p.boxes.size();
    preds_.resize(nb);
    succs_.resize(nb);
    for (BoxIndex b : p.user_boxes()) {
      preds_[b] = direct_predecessors(p, g, b);
      for (BoxIndex a : preds_[b]) succs_[a].push_back(b);
    }
  }

  void preset(PortId p, Slot s) { slots_[p.index()] = std::move(s); }

  RunResult run() {
    RunResult r;
    r.status.assign(p_.boxes.size(), BoxStatus::Blocked);
    r.status[kDataIOBox] = BoxStatus::Done;
    r.status[kFuncOutBox] = BoxStatus::Done;
    failures_.assign(p_.boxes.size(), std::nullopt);
    for (BoxIndex b : p_.user_boxes()) {
      if (preds_[b].empty()) {
        r.status[b] = BoxStatus::Ready;
        ready_.push_back(b);
      }
    }
    result_ = &r;

    const unsigned jobs = std::max(1u, opts_.jobs);
    std::vector<std::thread> extra;
    for (unsigned i = 1; i < jobs; ++i) extra.emplace_back([this] { worker(); });
    worker();
    for (auto& t : extra) t.join();

    for (BoxIndex b = 0; b < p_.boxes.size(); ++b)
      if (failures_[b]) r.failures.push_back(*failures_[b]);
    collect(r);
    soundness(r);
    return r;
  }

 private:
  void worker() {
    std::unique_lock lock(mu_);
    while (true) {
      cv_.wait(lock, [&] { return !ready_.empty() || running_ == 0; });
      if (ready_.empty()) {
        cv_.notify_all();
        return;
      }
      const BoxIndex b = ready_.front();
      ready_.pop_front();
      ++running_;
      lock.unlock();
      BoxOutcome out = execute(b);
      lock.lock();
      commit(b, std::move(out));
      --running_;
      cv_.notify_all();
    }
  }

  void commit(BoxIndex b, BoxOutcome out) {
    RunResult& r = *result_;
    const Box& box = p_.boxes[b];
    for (const auto& entry : out.outputs) {
      const Slot& existing = slots_[entry.first.index()];
      if (out.ok && (existing.data || existing.func)) {  // single assignment
        out.ok = false;
        out.code = codes::kRuntimeShape;
        out.message = "slot of port " + std::to_string(entry.first.value) + " written twice";
      }
    }
    if (out.ok) {
      std::string ports;
      for (auto& [port, slot] : out.outputs) {
        slots_[port.index()] = std::move(slot);
        ports += (ports.empty() ? "" : ",") + std::to_string(port.value);
      }
      r.status[b] = BoxStatus::Done;
      r.log.push_back("DONE " + box.id + " " + std::to_string(out.ms) + " " + ports);
    } else {
      fail(b, out.code, out.message);
    }
    release(b);
  }

  void fail(BoxIndex b, std::string_view code, const std::string& message) {
    result_->status[b] = BoxStatus::Failed;
    const Box& box = p_.boxes[b];
    failures_[b] = make_error(code, std::string(to_string(box.kind)) + " '" + box.id + "': " + message,
                              box.span, p_.outputs_of(b));
  }

  void release(BoxIndex b) {
    RunResult& r = *result_;
    std::vector<BoxIndex> next = succs_[b];
    std::sort(next.begin(), next.end());
    for (BoxIndex s : next) {
      if (r.status[s] != BoxStatus::Blocked) continue;
      bool all_terminal = true;
      std::optional<BoxIndex> failed;
      for (BoxIndex a : preds_[s]) {
        if (r.status[a] == BoxStatus::Failed && !failed) failed = a;
        if (r.status[a] != BoxStatus::Done && r.status[a] != BoxStatus::Failed)
          all_terminal = false;
      }
      if (!all_terminal) continue;
      if (failed) {
        fail(s, codes::kBoxFailed, "not run because '" + p_.boxes[*failed].id + "' failed");
        release(s);
      } else {
        r.status[s] = BoxStatus::Ready;
        ready_.push_back(s);
      }
    }
  }

  const Slot& source_slot(PortId input) const {
    return slots_[source_of(p_, input).index()];
  }

  std::vector<DataBatch> gather(const std::vector<PortId>& ins) const {
    std::vector<DataBatch> out;
    for (PortId q : ins) {
      const Slot& s = source_slot(q);
      if (!s.data) throw Error(codes::kRuntimeShape, "no batch reached port " + std::to_string(q.value));
      out.push_back(*s.data);
    }
    return out;
  }

  FunctionSignature snapshot(PortId port) const {
    FunctionSignature sig;
    auto t = env_.func_type(port);
    if (!t) return sig;
    for (TypeId x : t->inputs) sig.inputs.push_back({x, env_.labels_of(x)});
    for (TypeId x : t->outputs) sig.outputs.push_back({x, env_.labels_of(x)});
    return sig;
  }

  FunctionPtr finish(const FunctionPtr& f, BoxIndex b, PortId port, std::uint64_t seed) const {
    return stamp(f, snapshot(port), Provenance{p_.name, p_.boxes[b].id, p_.port(port).name, seed});
  }

  BoxOutcome execute(BoxIndex b) {
    const auto start = std::chrono::steady_clock::now();
    BoxOutcome out;
    try {
      run_box(b, out);
    } catch (const Error& e) {
      out = BoxOutcome{false, e.code(), e.what(), {}, 0};
    } catch (const std::exception& e) {
      out = BoxOutcome{false, std::string(codes::kBoxFailed), e.what(), {}, 0};
    }
    out.ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - start)
                                   .count());
    return out;
  }

  void run_box(BoxIndex b, BoxOutcome& out) {
    const Box& box = p_.boxes[b];
    const auto ins = p_.ports_of(b, Direction::Input, PortClass::Data);
    const std::vector<DataBatch> data = gather(ins);
    for (std::size_t i = 1; i < data.size(); ++i) {
      if (data[i].samples() != data[0].samples())
        throw Error(codes::kBatch, "input batches differ in sample count (port " +
                                       std::to_string(ins[0].value) + ": " +
                                       std::to_string(data[0].samples()) + ", port " +
                                       std::to_string(ins[i].value) + ": " +
                                       std::to_string(data[i].samples()) + ")");
    }
    const RunContext ctx{box_seed(opts_.seed, box.id), opts_.base_dir};
    const std::string predef = box.param ? box.param->predef : std::string();

    switch (box.kind) {
      case BoxKind::Processor: {
        const auto outs = p_.ports_of(b, Direction::Output, PortClass::Data);
        const auto fin = p_.ports_of(b, Direction::Input, PortClass::Function);
        std::vector<DataBatch> result;
        if (!fin.empty()) {
          const FunctionPtr& f = source_slot(fin.front()).func;
          if (!f) throw Error(codes::kRuntimeShape, "no function reached port " + std::to_string(fin.front().value));
          result = fdf::apply(*f, data);
        } else {
          result = lib_.lookup(Role::Processor, predef).behavior.processor(data, ctx);
        }
        if (result.size() != outs.size())
          throw Error(codes::kRuntimeShape, "produced " + std::to_string(result.size()) +
                                                " batches for " + std::to_string(outs.size()) +
                                                " output ports");
        for (std::size_t j = 0; j < outs.size(); ++j) {
          if (!data.empty() && result[j].samples() != data[0].samples())
            throw Error(codes::kRuntimeShape, "output " + std::to_string(j + 1) +
                                                  " changed the number of samples");
          if (!result[j].all_finite())
            throw Error(codes::kRuntimeShape,
                        "output " + std::to_string(j + 1) + " contains non-finite values");
          out.outputs.push_back({outs[j], Slot{std::move(result[j]), nullptr}});
        }
        break;
      }
      case BoxKind::Coder: {
        const auto outs = p_.ports_of(b, Direction::Output, PortClass::Function);
        CoderPair pair = lib_.lookup(Role::Coder, predef).behavior.coder(data, ctx);
        out.outputs.push_back({outs[0], Slot{std::nullopt, finish(pair.encode, b, outs[0], ctx.seed)}});
        if (outs.size() > 1)
          out.outputs.push_back({outs[1], Slot{std::nullopt, finish(pair.decode, b, outs[1], ctx.seed)}});
        break;
      }
      case BoxKind::Trainer: {
        const auto outs = p_.ports_of(b, Direction::Output, PortClass::Function);
        const std::size_t k = box.param && box.param->split ? *box.param->split : 1;
        std::span<const DataBatch> all(data);
        FunctionPtr f = lib_.lookup(Role::Trainer, predef)
                            .behavior.trainer(all.first(k), all.subspan(k), ctx);
        out.outputs.push_back({outs[0], Slot{std::nullopt, finish(f, b, outs[0], ctx.seed)}});
        break;
      }
      case BoxKind::DataIO:
      case BoxKind::FuncOut:
        break;
    }
  }

  void collect(RunResult& r) const {
    for (const Port& q : p_.ports) {
      if (!q.is_input() || !is_implicit(p_.boxes[q.box].kind)) continue;
      const auto& src = p_.sigma[q.index()];
      if (!src) continue;
      const Slot& s = slots_[src->index()];
      if (q.box == kDataIOBox && s.data) r.sinks.emplace(q.id, *s.data);
      if (q.box == kFuncOutBox && s.func) r.exports.emplace(q.id, s.func);
    }
  }

  // Equal canonical data type must mean equal per-sample width.
  void soundness(RunResult& r) const {
    std::map<TypeId, std::pair<Index, PortId>> seen;
    for (const Port& q : p_.ports) {
      if (q.cls != PortClass::Data) continue;
      const Slot* s = nullptr;
      if (q.is_output()) {
        s = &slots_[q.index()];
      } else if (const auto& src = p_.sigma[q.index()]) {
        s = &slots_[src->index()];
      }
      auto t = env_.data_type(q.id);
      if (!s || !s->data || !t) continue;
      auto [it, fresh] = seen.emplace(*t, std::make_pair(s->data->width(), q.id));
      if (!fresh && it->second.first != s->data->width()) {
        r.failures.push_back(make_error(
            codes::kRuntimeShape,
            "ports " + std::to_string(it->second.second.value) + " and " +
                std::to_string(q.id.value) + " share type " + std::to_string(*t) +
                " but carry widths " + std::to_string(it->second.first) + " and " +
                std::to_string(s->data->width()),
            q.span, {it->second.second, q.id}));
      }
    }
  }

  const Pipeline& p_;
  const TypeEnv& env_;
  const Library& lib_;
  RunOptions opts_;
  std::vector<Slot> slots_;
  std::vector<std::set<BoxIndex>> preds_;
  std::vector<std::vector<BoxIndex>> succs_;
  std::vector<std::optional<Diagnostic>> failures_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<BoxIndex> ready_;
  unsigned running_ = 0;
  RunResult* result_ = nullptr;
};

}  // namespace

RunResult run(const Pipeline& pipeline, const FdfGraph& graph, const TypeEnv& env,
              const Library& library, const RunInputs& inputs, const RunOptions& options) {
  Executor ex(pipeline, graph, env, library, options);
  for (PortId o : pipeline.ports_of(kDataIOBox, Direction::Output, PortClass::Data)) {
    auto it = inputs.data.find(o);
    if (it == inputs.data.end())
      throw Error(codes::kMissingSource,
                  "no batch for source '" + pipeline.port(o).name + "' (port " +
                      std::to_string(o.value) + ")");
    ex.preset(o, Slot{it->second, nullptr});
  }
  for (PortId o : pipeline.ports_of(kFuncOutBox, Direction::Output, PortClass::Function)) {
    auto it = inputs.functions.find(o);
    if (it == inputs.functions.end() || !it->second)
      throw Error(codes::kMissingSource,
                  "no function for source '" + pipeline.port(o).name + "' (port " +
                      std::to_string(o.value) + ")");
    if (auto why = import_mismatch(pipeline.port(o), *it->second))
      throw Error(codes::kImport, "function source '" + pipeline.port(o).name + "': " + *why);
    ex.preset(o, Slot{std::nullopt, it->second});
  }
  return ex.run();
}

}  // namespace fdf
