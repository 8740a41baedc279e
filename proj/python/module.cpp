// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ced/backend.hpp"
#include "ced/cli.hpp"
#include "ced/dataset.hpp"
#include "ced/decoder.hpp"
#include "ced/distributions.hpp"
#include "ced/error.hpp"
#include "ced/experiment.hpp"
#include "ced/fusion.hpp"
#include "ced/metrics.hpp"

namespace py = pybind11;
using namespace ced;

namespace {

py::object from_json(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

std::vector<TokenLogProb> to_entries(const std::map<std::string, double>& weights) {
  std::vector<TokenLogProb> out;
  for (const auto& [token, w] : weights) out.push_back({token, w});
  return out;
}

py::dict to_dict(const LogProbDist& d) {
  py::dict out;
  for (const auto& e : d.entries()) out[py::str(e.token)] = e.logprob;
  return out;
}

}  // namespace

PYBIND11_MODULE(_ced, m) {
  m.doc() = "Contrastive-example decoding: distributions, prompt fusion, decoding, evaluation";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParameterError>(m, "ParameterError", base);
  py::register_exception<AlignmentError>(m, "AlignmentError", base);
  py::register_exception<FeatureError>(m, "FeatureError", base);
  py::register_exception<SelectionError>(m, "SelectionError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<BackendError>(m, "BackendError", base);
  py::register_exception<DatasetError>(m, "DatasetError", base);

  py::class_<LogProbDist>(m, "LogProbDist")
      .def_static(
          "from_probs",
          [](const std::map<std::string, double>& probs, bool truncated) {
            return LogProbDist::from_probs({probs.begin(), probs.end()}, truncated);
          },
          py::arg("probs"), py::arg("truncated") = false)
      .def_static(
          "from_logprobs",
          [](const std::map<std::string, double>& logprobs, bool truncated) {
            return LogProbDist::from_logprobs(to_entries(logprobs), truncated);
          },
          py::arg("logprobs"), py::arg("truncated") = false)
      .def_property_readonly("truncated", &LogProbDist::truncated)
      .def("logprob", &LogProbDist::logprob)
      .def("argmax", [](const LogProbDist& d) { return d.argmax().token; })
      .def("to_dict", &to_dict)
      .def("__len__", &LogProbDist::size)
      .def("__eq__", [](const LogProbDist& a, const LogProbDist& b) { return a == b; })
      .def("__repr__", [](const LogProbDist& d) {
        return "<LogProbDist size=" + std::to_string(d.size()) +
               (d.truncated() ? " truncated>" : ">");
      });

  py::class_<ScoredCandidates>(m, "ScoredCandidates")
      .def_readonly("head", &ScoredCandidates::head)
      .def_readonly("selected", &ScoredCandidates::selected)
      .def_property_readonly("scores", [](const ScoredCandidates& s) {
        py::dict out;
        for (const auto& c : s.scores) out[py::str(c.token)] = c.score;
        return out;
      });

  m.def("adaptive_head", &adaptive_head, py::arg("p_tilde"), py::arg("alpha") = kDefaultAlpha);
  m.def("ced_scores", &ced_scores, py::arg("p_tilde"), py::arg("p"),
        py::arg("alpha") = kDefaultAlpha, py::arg("floor") = kDefaultFloor);
  m.def("align_supports", &align_supports, py::arg("p_tilde"), py::arg("p"),
        py::arg("floor") = kDefaultFloor);
  m.def(
      "normalize",
      [](const std::map<std::string, double>& w) { return normalize(to_entries(w)); },
      py::arg("logweights"));

  py::class_<DescriptiveFeatures>(m, "DescriptiveFeatures")
      .def(py::init([](std::vector<std::string> tags, std::vector<std::string> attributes,
                       std::vector<std::string> captions) {
             return DescriptiveFeatures{std::move(tags), std::move(attributes), std::move(captions)};
           }),
           py::arg("tags") = std::vector<std::string>{},
           py::arg("attributes") = std::vector<std::string>{},
           py::arg("captions") = std::vector<std::string>{})
      .def_readwrite("tags", &DescriptiveFeatures::tags)
      .def_readwrite("attributes", &DescriptiveFeatures::attributes)
      .def_readwrite("captions", &DescriptiveFeatures::captions);

  py::class_<ContextExample>(m, "ContextExample")
      .def(py::init([](DescriptiveFeatures f, std::string question, std::string answer,
                       std::string question_type, std::string id) {
             return ContextExample{std::move(id), std::move(f), std::move(question),
                                   std::move(answer), std::move(question_type)};
           }),
           py::arg("features"), py::arg("question"), py::arg("answer"),
           py::arg("question_type") = "", py::arg("id") = "")
      .def_readwrite("id", &ContextExample::id)
      .def_readwrite("features", &ContextExample::features)
      .def_readwrite("question", &ContextExample::question)
      .def_readwrite("answer", &ContextExample::answer)
      .def_readwrite("question_type", &ContextExample::question_type);

  py::class_<PromptTemplate>(m, "PromptTemplate")
      .def(py::init<>())
      .def(py::init<std::string, std::string>(), py::arg("header"), py::arg("example_block"))
      .def_static("load", &PromptTemplate::load)
      .def_static("parse", &PromptTemplate::parse)
      .def_property_readonly("header", &PromptTemplate::header)
      .def_property_readonly("example_block", &PromptTemplate::example_block);

  py::class_<PromptPair>(m, "PromptPair")
      .def(py::init([](std::string plain, std::string with_examples, std::size_t header_size) {
             return PromptPair{std::move(plain), std::move(with_examples), header_size};
           }),
           py::arg("plain"), py::arg("with_examples"), py::arg("header_size") = 0)
      .def_readonly("plain", &PromptPair::plain)
      .def_readonly("with_examples", &PromptPair::with_examples)
      .def_readonly("header_size", &PromptPair::header_size)
      .def_property_readonly("body", [](const PromptPair& p) { return std::string(p.body()); });

  m.def("render_features", &render_features, py::arg("features"), py::arg("n") = kDefaultTopN);
  m.def("render_example", &render_example, py::arg("example"), py::arg("n") = kDefaultTopN,
        py::arg("template") = PromptTemplate());
  m.def(
      "build_prompt_pair",
      [](const std::vector<ContextExample>& examples, const DescriptiveFeatures& f,
         const std::string& question, int n, const PromptTemplate& tmpl) {
        return build_prompt_pair(examples, f, question, n, tmpl);
      },
      py::arg("examples"), py::arg("features"), py::arg("question"), py::arg("n") = kDefaultTopN,
      py::arg("template") = PromptTemplate());
  m.def(
      "select_examples",
      [](const std::vector<ContextExample>& pool, const std::string& query_type, std::size_t k,
         const std::string& strategy, std::uint64_t seed) {
        return select_examples(pool, query_type, k, parse_strategy(strategy), seed);
      },
      py::arg("pool"), py::arg("query_type"), py::arg("k"), py::arg("strategy") = "question_type",
      py::arg("seed") = 0);
  m.def("question_type", &question_type, py::arg("question"), py::arg("explicit") = py::none());

  py::class_<Backend, std::shared_ptr<Backend>>(m, "Backend")
      .def("next_token_logprobs", &Backend::next_token_logprobs, py::arg("context"),
           py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("model", &Backend::model_name)
      .def_property_readonly("eos", &Backend::eos_token);

  py::class_<TableBackend, Backend, std::shared_ptr<TableBackend>>(m, "TableBackend")
      .def(py::init([](const std::vector<std::pair<std::string, std::map<std::string, double>>>& rules,
                       std::optional<std::string> eos) {
             std::vector<TableRule> built;
             for (const auto& [suffix, probs] : rules) {
               built.push_back({suffix, LogProbDist::from_probs({probs.begin(), probs.end()})});
             }
             return std::make_shared<TableBackend>(build_toy_table(std::move(built), std::move(eos)));
           }),
           py::arg("rules"), py::arg("eos") = py::none())
      .def_static("load", [](const std::filesystem::path& p) {
        return std::make_shared<TableBackend>(TableBackend::load(p));
      })
      .def_property_readonly("vocab_size", &TableBackend::vocab_size);

  py::class_<BigramBackend, Backend, std::shared_ptr<BigramBackend>>(m, "BigramBackend")
      .def("distribution_after", &BigramBackend::distribution_after)
      .def_property_readonly("vocab_size", &BigramBackend::vocab_size);
  m.def(
      "fit_bigram",
      [](const std::vector<std::string>& corpus, double smoothing) {
        return std::make_shared<BigramBackend>(fit_bigram(corpus, smoothing));
      },
      py::arg("corpus"), py::arg("smoothing") = 0.0);

  py::class_<RemoteBackend, Backend, std::shared_ptr<RemoteBackend>>(m, "RemoteBackend")
      .def(py::init([](std::string endpoint, std::size_t top_k, double timeout, std::size_t in_flight) {
             RemoteOptions o;
             o.endpoint = std::move(endpoint);
             o.top_k = top_k;
             o.timeout = std::chrono::duration<double>(timeout);
             o.max_in_flight = in_flight;
             return std::make_shared<RemoteBackend>(std::move(o));
           }),
           py::arg("endpoint"), py::arg("top_k") = 20, py::arg("timeout") = 30.0,
           py::arg("max_in_flight") = 8)
      .def("health", &RemoteBackend::health, py::call_guard<py::gil_scoped_release>());

  py::class_<DecodeParams>(m, "DecodeParams")
      .def(py::init([](double alpha, int max_new_tokens, std::vector<std::string> stop, double floor) {
             DecodeParams p{alpha, max_new_tokens, std::move(stop), floor};
             p.validate();
             return p;
           }),
           py::arg("alpha") = kDefaultAlpha, py::arg("max_new_tokens") = 32,
           py::arg("stop") = std::vector<std::string>{"\n"}, py::arg("floor") = kDefaultFloor)
      .def_readwrite("alpha", &DecodeParams::alpha)
      .def_readwrite("max_new_tokens", &DecodeParams::max_new_tokens)
      .def_readwrite("stop", &DecodeParams::stop_sequences)
      .def_readwrite("floor", &DecodeParams::floor);

  m.def(
      "decode_ced",
      [](const Backend& backend, const PromptPair& prompts, const DecodeParams& params) {
        DecodeTrace trace;
        {
          py::gil_scoped_release release;
          trace = decode_ced(backend, prompts, params);
        }
        return from_json(trace_to_json(trace));
      },
      py::arg("backend"), py::arg("prompts"), py::arg("params") = DecodeParams());
  m.def(
      "decode_greedy",
      [](const Backend& backend, const std::string& prompt, const DecodeParams& params) {
        DecodeTrace trace;
        {
          py::gil_scoped_release release;
          trace = decode_greedy(backend, prompt, params);
        }
        return from_json(trace_to_json(trace));
      },
      py::arg("backend"), py::arg("prompt"), py::arg("params") = DecodeParams());

  m.def("normalize_answer", &normalize_answer);
  m.def("exact_match", &exact_match, py::arg("pred"), py::arg("answers"));
  m.def("vqa_soft_accuracy", &vqa_soft_accuracy, py::arg("pred"), py::arg("answers"));

  m.def(
      "load_dataset",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& r : load_dataset(path)) {
          out.append(py::module_::import("json").attr("loads")(record_to_jsonl(r)));
        }
        return out;
      },
      py::arg("path"));
  m.def(
      "validate_dataset",
      [](const std::filesystem::path& path) {
        std::vector<std::pair<std::size_t, std::string>> out;
        for (const auto& d : validate_dataset(path)) out.emplace_back(d.line, d.message);
        return out;
      },
      py::arg("path"));

  m.def(
      "run_experiment",
      [](const std::filesystem::path& dataset, const Backend& backend,
         const std::vector<std::string>& methods, const std::vector<std::size_t>& shots,
         const std::string& strategy, std::uint64_t seed, const DecodeParams& params, int top_n,
         const std::string& metric, std::size_t jobs) {
        ExperimentGrid grid;
        grid.methods.clear();
        for (const auto& name : methods) grid.methods.push_back(parse_method(name));
        grid.shots = shots;
        grid.strategy = parse_strategy(strategy);
        grid.seed = seed;
        grid.params = params;
        grid.top_n = top_n;
        grid.metric = parse_metric(metric);
        grid.jobs = jobs;
        const auto records = load_dataset(dataset);
        ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(records, backend, grid);
        }
        return from_json(report_to_json(report));
      },
      py::arg("dataset"), py::arg("backend"),
      py::arg("methods") = std::vector<std::string>{"greedy", "ced"},
      py::arg("shots") = std::vector<std::size_t>{0, 1, 3, 5},
      py::arg("strategy") = "question_type", py::arg("seed") = 0,
      py::arg("params") = DecodeParams(), py::arg("top_n") = kDefaultTopN,
      py::arg("metric") = "auto", py::arg("jobs") = 1);

  m.def(
      "cli_main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "ced");
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
