// SPDX-License-Identifier: Apache-2.0

#include "ced/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ced/backend.hpp"
#include "ced/dataset.hpp"
#include "ced/decoder.hpp"
#include "ced/error.hpp"
#include "ced/experiment.hpp"

namespace ced::cli {
namespace {

struct DecodeOneOptions {
  std::string id;
  std::size_t shots = 0;
  std::string method = "ced";
};

struct Invocation {
  RunConfig config;
  DecodeOneOptions decode;
  std::string validate_path;
  std::string config_file;
  bool json = false;
};

void add_common_options(CLI::App& sub, Invocation& inv) {
  auto& cfg = inv.config;
  sub.add_option("--config", inv.config_file, "Key/value config file; flags given on the command line win");
  sub.add_option("--dataset", cfg.dataset, "Dataset JSONL path");
  sub.add_option("--backend", cfg.backend, "table:PATH | bigram:PATH | remote:URL");
  sub.add_option("--alpha", cfg.alpha, "Plausibility threshold in [0, 1]")->capture_default_str();
  sub.add_option("--strategy", cfg.strategy, "question_type | random")->capture_default_str();
  sub.add_option("--seed", cfg.seed, "Seed for example draws")->capture_default_str();
  sub.add_option("--top-n", cfg.top_n, "Items per feature list")->capture_default_str();
  sub.add_option("--max-new-tokens", cfg.max_new_tokens)->capture_default_str();
  sub.add_option("--stop", cfg.stop, "Stop sequence (repeatable, \\n escapes allowed)");
  sub.add_option("--floor", cfg.floor, "Log-probability for tokens missing from one side")
      ->capture_default_str();
  sub.add_option("--template", cfg.prompt_template, "Prompt template file");
  sub.add_option("--top-k", cfg.top_k, "Entries requested from remote backends")->capture_default_str();
  sub.add_option("--timeout", cfg.timeout, "Remote request timeout in seconds")->capture_default_str();
  sub.add_option("--smoothing", cfg.smoothing, "Additive smoothing for bigram backends")
      ->capture_default_str();
  sub.add_flag("-v,--verbose", cfg.verbosity, "Progress output on stderr");
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

void build_app(CLI::App& app, Invocation& inv) {
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Evaluate a dataset over a (method, shots) grid");
  add_common_options(*run, inv);
  run->add_option("--shots", inv.config.shots, "Shot counts, comma separated")->delimiter(',');
  run->add_option("--methods", inv.config.methods, "greedy,ced")->delimiter(',');
  run->add_option("--metric", inv.config.metric, "auto | exact_match | vqa_soft")->capture_default_str();
  run->add_option("--jobs", inv.config.jobs, "Worker threads (0: one per processor)");
  run->add_option("--out", inv.config.out, "Report JSON path; the text table goes next to it (.txt)");
  run->add_flag("--json", inv.json, "Print the JSON report instead of the table");

  auto* decode = app.add_subcommand("decode", "Decode one record and print the trace");
  add_common_options(*decode, inv);
  decode->add_option("--id", inv.decode.id, "Record id")->required();
  decode->add_option("-k,--shots", inv.decode.shots, "Number of context examples")->capture_default_str();
  decode->add_option("--method", inv.decode.method, "greedy | ced")->capture_default_str();
  decode->add_flag("--json", inv.json, "Print the trace as JSON");

  auto* validate = app.add_subcommand("validate", "Schema-check a dataset file");
  validate->add_option("dataset,--dataset", inv.validate_path, "Dataset JSONL path")->required();
}

// CLI11 only reads config files attached to the root app, so subcommands
// apply theirs after parsing. Keys set on the command line are left alone.
void apply_config_file(CLI::App& sub, const std::string& path) {
  static const std::set<std::string> run_only{"shots", "methods", "metric", "jobs", "out"};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw ConfigError("cannot read config file " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty()) throw ConfigError("config file " + path + ": unexpected section in '" + item.fullname() + "'");
    if (sub.get_name() == "decode" && run_only.count(item.name)) continue;
    auto* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") {
      throw ConfigError("config file " + path + ": unknown key '" + item.name + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config file " + path + ": key '" + item.name + "': " + e.what());
    }
  }
}

void finalize(CLI::App& app, Invocation& inv) {
  if (!inv.config_file.empty()) {
    for (auto* sub : app.get_subcommands()) apply_config_file(*sub, inv.config_file);
  }
  for (auto& s : inv.config.stop) s = unescape(s);
}

DecodeParams decode_params(const RunConfig& cfg) {
  DecodeParams p;
  p.alpha = cfg.alpha;
  p.max_new_tokens = cfg.max_new_tokens;
  p.stop_sequences = cfg.stop;
  p.floor = cfg.floor;
  p.validate();
  return p;
}

PromptTemplate prompt_template(const RunConfig& cfg) {
  return cfg.prompt_template.empty() ? PromptTemplate() : PromptTemplate::load(cfg.prompt_template);
}

std::shared_ptr<const Backend> open_backend(RunConfig& cfg) {
  if (cfg.backend.empty()) throw ConfigError("--backend is required");
  auto descriptor = BackendDescriptor::parse(cfg.backend);
  descriptor.top_k = cfg.top_k;
  descriptor.timeout_seconds = cfg.timeout;
  descriptor.smoothing = cfg.smoothing;
  auto backend = make_backend(descriptor);
  cfg.backend = descriptor.to_string();
  if (const auto* remote = dynamic_cast<const RemoteBackend*>(backend.get())) remote->health();
  return backend;
}

std::vector<EvalRecord> open_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw DatasetError("--dataset is required", 0);
  return load_dataset(cfg.dataset);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

int cmd_run(Invocation& inv, std::ostream& out, std::ostream& err) {
  auto& cfg = inv.config;
  ExperimentGrid grid;
  grid.params = decode_params(cfg);
  grid.methods.clear();
  for (const auto& m : cfg.methods) grid.methods.push_back(parse_method(m));
  grid.shots = cfg.shots;
  grid.strategy = parse_strategy(cfg.strategy);
  grid.seed = cfg.seed;
  grid.top_n = cfg.top_n;
  if (grid.top_n < 1) throw ConfigError("--top-n must be >= 1");
  grid.metric = parse_metric(cfg.metric);
  grid.prompt_template = prompt_template(cfg);
  grid.jobs = cfg.jobs > 0 ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());

  const auto dataset = open_dataset(cfg);
  const auto backend = open_backend(cfg);
  if (cfg.verbosity > 0) {
    err << "evaluating " << dataset.size() << " records with " << grid.jobs << " workers\n";
  }
  auto report = run_experiment(dataset, *backend, grid);
  report.config = cfg.to_json();
  report.config["resolved"] = grid.echo();

  const std::string json = report_to_json(report).dump(2) + "\n";
  const std::string table = report_to_text(report);
  if (!cfg.out.empty()) {
    std::filesystem::path path(cfg.out);
    write_file(path, json);
    write_file(std::filesystem::path(path).replace_extension(".txt"), table);
  }
  out << (inv.json ? json : table);
  return kOk;
}

void print_trace(const DecodeTrace& trace, std::ostream& out) {
  out << "=== plain prompt ===\n" << trace.plain_prompt << "\n";
  if (trace.method == DecodeMethod::kCed) {
    out << "=== prompt with examples ===\n" << trace.with_examples_prompt << "\n";
  }
  out << "=== steps ===\n";
  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    const auto& s = trace.steps[j];
    out << "step " << j << ": selected \"" << escape(s.selected) << "\"";
    if (s.scored) {
      std::vector<std::string> head;
      for (const auto& t : s.scored->head) head.push_back("\"" + escape(t) + "\"");
      out << "\n  head: [" << join(head, ", ") << "]\n  scores:";
      for (const auto& c : s.scored->scores) {
        if (c.masked()) continue;
        std::ostringstream v;
        v << c.score;
        out << " \"" << escape(c.token) << "\"=" << v.str();
      }
    } else {
      std::ostringstream v;
      v << s.p.argmax().logprob;
      out << " (logprob " << v.str() << ")";
    }
    out << "\n";
  }
  out << "stop: " << to_string(trace.stop_reason) << "\n";
  out << "answer: " << trace.output << "\n";
}

int cmd_decode(Invocation& inv, std::ostream& out) {
  auto& cfg = inv.config;
  const auto params = decode_params(cfg);
  const auto method = parse_method(inv.decode.method);
  const auto strategy = parse_strategy(cfg.strategy);
  const auto tmpl = prompt_template(cfg);
  const auto dataset = open_dataset(cfg);

  const EvalRecord* record = nullptr;
  std::vector<ContextExample> pool;
  for (const auto& r : dataset) {
    if (r.id == inv.decode.id) record = &r;
    if (r.split == Split::kPool) pool.push_back(r.as_example());
  }
  if (record == nullptr) throw DatasetError("unknown record id \"" + inv.decode.id + "\"", 0);
  const auto backend = open_backend(cfg);

  // A pool record decoded as a query must not see itself as a shot.
  std::erase_if(pool, [&](const ContextExample& e) { return e.id == record->id; });
  const auto shots = select_examples(pool, record->resolved_question_type(), inv.decode.shots,
                                     strategy, record_seed(cfg.seed, record->id));
  const auto prompts =
      build_prompt_pair(shots, record->features, record->question, cfg.top_n, tmpl,
                        std::max(inv.decode.shots, kDefaultMaxShots));
  const auto trace = method == DecodeMethod::kCed
                         ? decode_ced(*backend, prompts, params)
                         : decode_greedy(*backend, prompts.with_examples, params);
  if (inv.json) {
    out << trace_to_json(trace).dump(2) << "\n";
  } else {
    print_trace(trace, out);
  }
  return kOk;
}

int cmd_validate(const Invocation& inv, std::ostream& out) {
  const auto diagnostics = validate_dataset(inv.validate_path);
  for (const auto& d : diagnostics) {
    out << inv.validate_path;
    if (d.line > 0) out << ":" << d.line;
    out << ": " << d.message << "\n";
  }
  if (diagnostics.empty()) {
    out << inv.validate_path << ": ok\n";
    return kOk;
  }
  return kInvalid;
}

}  // namespace

std::string unescape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\' || i + 1 == text.size()) {
      out += text[i];
      continue;
    }
    switch (text[++i]) {
      case 'n':
        out += '\n';
        break;
      case 't':
        out += '\t';
        break;
      case 'r':
        out += '\r';
        break;
      case '\\':
        out += '\\';
        break;
      case '"':
        out += '"';
        break;
      default:
        out += '\\';
        out += text[i];
    }
  }
  return out;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '"':
        out += "\\\"";
        break;
      default:
        out += c;
    }
  }
  return out;
}

nlohmann::json RunConfig::to_json() const {
  return {{"dataset", dataset},
          {"backend", backend},
          {"alpha", alpha},
          {"shots", shots},
          {"methods", methods},
          {"strategy", strategy},
          {"seed", seed},
          {"top_n", top_n},
          {"max_new_tokens", max_new_tokens},
          {"stop", stop},
          {"floor", floor},
          {"metric", metric},
          {"template", prompt_template},
          {"top_k", top_k},
          {"timeout", timeout},
          {"smoothing", smoothing}};
}

std::string RunConfig::to_config_text() const {
  std::ostringstream out;
  out.precision(17);
  auto quoted = [](std::string_view s) { return "\"" + escape(s) + "\""; };
  auto list = [&](const auto& items, auto&& render) {
    std::string s = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) s += ", ";
      s += render(items[i]);
    }
    return s + "]";
  };
  if (!dataset.empty()) out << "dataset = " << quoted(dataset) << "\n";
  if (!backend.empty()) out << "backend = " << quoted(backend) << "\n";
  out << "alpha = " << alpha << "\n";
  out << "shots = " << list(shots, [](std::size_t k) { return std::to_string(k); }) << "\n";
  out << "methods = " << list(methods, quoted) << "\n";
  out << "strategy = " << quoted(strategy) << "\n";
  out << "seed = " << seed << "\n";
  out << "top-n = " << top_n << "\n";
  out << "max-new-tokens = " << max_new_tokens << "\n";
  out << "stop = " << list(stop, quoted) << "\n";
  out << "floor = " << floor << "\n";
  out << "metric = " << quoted(metric) << "\n";
  if (!prompt_template.empty()) out << "template = " << quoted(prompt_template) << "\n";
  out << "top-k = " << top_k << "\n";
  out << "timeout = " << timeout << "\n";
  out << "smoothing = " << smoothing << "\n";
  out << "jobs = " << jobs << "\n";
  if (!this->out.empty()) out << "out = " << quoted(this->out) << "\n";
  return out.str();
}

RunConfig parse_run_config(const std::vector<std::string>& args) {
  CLI::App app{"ced"};
  Invocation inv;
  build_app(app, inv);
  std::vector<std::string> argv{"run"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  finalize(app, inv);
  return inv.config;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive-example decoding for visual question answering", "ced"};
  Invocation inv;
  build_app(app, inv);
  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    finalize(app, inv);
    if (app.got_subcommand("run")) return cmd_run(inv, out, err);
    if (app.got_subcommand("decode")) return cmd_decode(inv, out);
    return cmd_validate(inv, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kBackendError;
  } catch (const DatasetError& e) {
    err << "dataset error: " << e.what() << "\n";
    return kDatasetError;
  } catch (const SelectionError& e) {
    err << "dataset error: " << e.what() << "\n";
    return kDatasetError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }
}

}  // namespace ced::cli
