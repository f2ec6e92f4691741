/*
 * Copyright 2026 The XplainBench Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// The xplainbench command line: gen-data, run, bench, ask-llm.
// Exit codes: 0 ok, 1 runtime error, 2 validation error, 3 partial failure.

#pragma once

#include "xplainbench/llm_client.hpp"
#include "xplainbench/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace xplainbench::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kValidation = 2, kPartial = 3 };

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

// Writes to --out when given, otherwise to stdout.
inline void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty()) out << text;
  else write_file(out_path, text);
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<std::size_t> eval_sample;

  void apply(PipelineSpec& s) const {
    if (seed) {
      s.task.alertness.seed = *seed;
      s.split.seed = *seed;
      s.model.seed = *seed;
      s.explainer.seed = *seed;
      s.explainer.eval_seed = *seed;
    }
    if (tau) {
      if (!(*tau >= 0)) throw ValidationError("--tau must be >= 0");
      s.metrics.tau = *tau;
    }
    if (eval_sample) {
      if (*eval_sample < 1) throw ValidationError("--eval-sample must be >= 1");
      s.explainer.eval_size = *eval_sample;
    }
  }
};

inline void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override every seed in the spec (data, split, model, explainer)");
  cmd->add_option("--tau", o.tau, "Override the sparsity threshold tau");
  cmd->add_option("--eval-sample", o.eval_sample, "Override the number of test rows explained");
}

inline std::string render_run(const RunReport& r, const std::string& format) {
  if (format == "json") return to_json(r).dump(2) + "\n";
  BenchmarkResult one;
  one.rows.push_back({r.spec.source, to_string(r.spec.task.kind), to_string(r.spec.model.family()), r, std::nullopt});
  if (format == "csv") {
    std::string s = performance_table(one).render(TableStyle::kCsv);
    s += "\n" + explainability_table(one).render(TableStyle::kCsv);
    return s;
  }
  std::string s = "## Performance\n\n" + performance_table(one).render(TableStyle::kMarkdown);
  s += "\n## Explainability\n\n" + explainability_table(one).render(TableStyle::kMarkdown);
  s += "\n## Per-class\n\n" + per_class_table(r.performance, r.class_names).render(TableStyle::kMarkdown);
  s += "\nspec_hash: " + r.spec_hash + "\n";
  return s;
}

inline std::string render_bench(const BenchmarkResult& b, const std::string& format) {
  if (format == "json") return to_json(b).dump(2) + "\n";
  if (format == "csv")
    return performance_table(b).render(TableStyle::kCsv) + "\n" + explainability_table(b).render(TableStyle::kCsv);
  return "## Performance\n\n" + performance_table(b).render(TableStyle::kMarkdown) + "\n## Explainability\n\n" +
         explainability_table(b).render(TableStyle::kMarkdown);
}

inline std::vector<PipelineSpec> load_suite_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("suite directory '" + dir + "' not found");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 14 && name.ends_with(".pipeline.json")) files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("benchmark: no *.pipeline.json files in '" + dir + "'");
  std::vector<PipelineSpec> suite;
  std::vector<SpecIssue> issues;
  for (const auto& f : files) {
    try {
      suite.push_back(parse_spec(read_file(f)));
    } catch (const SpecError& e) {
      for (const auto& i : e.issues()) issues.push_back({f + ": " + i.path, i.message});
    }
  }
  if (!issues.empty()) throw SpecError(std::move(issues));
  return suite;
}

}  // namespace detail

/// Runs the CLI on `args` (without the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Train, explain and score tabular classifiers from declarative pipeline specs.", "xplainbench"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print progress to stderr");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic driver-alertness dataset as CSV");
  long long gen_n = 20000;
  std::uint64_t gen_seed = 42;
  int gen_low = 60, gen_high = 100;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Number of rows")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--hr-low", gen_low, "Lower bound of the alert heart-rate band (bpm)")->capture_default_str();
  gen->add_option("--hr-high", gen_high, "Upper bound of the alert heart-rate band (bpm)")->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute one pipeline spec and print its report");
  std::string run_spec, run_format = "md", run_out, run_attr;
  detail::Overrides run_ovr;
  run_cmd->add_option("spec", run_spec, "Pipeline spec file (.pipeline.json)")->required();
  run_cmd->add_option("--format", run_format, "Report format")
      ->check(CLI::IsMember({"md", "csv", "json"}))
      ->capture_default_str();
  run_cmd->add_option("--out", run_out, "Write the report to this file instead of stdout");
  run_cmd->add_option("--attributions", run_attr, "Also write per-row attributions (CSV: fx, phi0, phi_1..phi_d)");
  detail::add_overrides(run_cmd, run_ovr);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a suite of specs and print performance and explainability tables");
  std::string bench_suite, bench_builtin, bench_yeast = kDefaultYeastPath, bench_format = "md", bench_out;
  detail::Overrides bench_ovr;
  auto* suite_opt = bench->add_option("--suite", bench_suite, "Directory of *.pipeline.json specs (run in name order)");
  bench->add_option("--builtin", bench_builtin, "Built-in suite: paper = {random_forest, gbt, mlp} x {alertness, yeast}")
      ->check(CLI::IsMember({"paper"}))
      ->excludes(suite_opt);
  bench->add_option("--yeast", bench_yeast, "Yeast CSV used by the built-in suite")->capture_default_str();
  bench->add_option("--format", bench_format, "Table format")
      ->check(CLI::IsMember({"md", "csv", "json"}))
      ->capture_default_str();
  bench->add_option("--out", bench_out, "Write the tables to this file instead of stdout");
  detail::add_overrides(bench, bench_ovr);

  // ask-llm
  auto* ask = app.add_subcommand("ask-llm", "Render a prompt, obtain a pipeline spec from a chat endpoint, validate it");
  std::string ask_task, ask_family, ask_endpoint, ask_replay, ask_record, ask_out, ask_transcript;
  LlmRequestOptions ask_opts;
  ask->add_option("--task", ask_task, "Prompt task")->required()->check(CLI::IsMember({"binary", "multiclass"}));
  ask->add_option("--family", ask_family, "Model family named in the prompt")
      ->required()
      ->check(CLI::IsMember({"random_forest", "gbt", "mlp", "lstm"}));
  auto* endpoint_opt =
      ask->add_option("--endpoint", ask_endpoint, "Chat-completions URL; the API key is read from XPLAINBENCH_API_KEY");
  auto* replay_opt = ask->add_option("--replay", ask_replay, "Answer from a recorded fixture file (no network)");
  endpoint_opt->excludes(replay_opt);
  ask->add_option("--record", ask_record, "With --endpoint: save the exchanges as a replay fixture")->needs(endpoint_opt);
  ask->add_option("--model", ask_opts.model, "Model name sent to the endpoint")->capture_default_str();
  ask->add_option("--temperature", ask_opts.temperature, "Sampling temperature")->capture_default_str();
  ask->add_option("--max-retries", ask_opts.max_retries, "Re-prompts with validation errors before giving up")
      ->capture_default_str();
  ask->add_option("--out", ask_out, "Where to write the validated spec")->required();
  ask->add_option("--transcript", ask_transcript, "Exchange transcript path (default: <out>.exchange.json)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidation;
  }

  try {
    if (*gen) {
      AlertnessGenConfig cfg;
      if (gen_n < 1) throw ValidationError("gen-data: --n must be >= 1");
      cfg.n = static_cast<std::size_t>(gen_n);
      cfg.seed = gen_seed;
      cfg.hr_band_low = gen_low;
      cfg.hr_band_high = gen_high;
      const auto ds = generate_alertness(cfg);
      write_csv(ds, gen_out);
      const auto counts = ds.class_counts();
      out << "wrote " << ds.size() << " rows to " << gen_out << "; alert fraction "
          << fixed(static_cast<double>(counts[1]) / static_cast<double>(ds.size()), 4) << "\n";
      return kOk;
    }

    if (*run_cmd) {
      PipelineSpec spec = parse_spec(detail::read_file(run_spec));
      run_ovr.apply(spec);
      std::vector<Attribution> rows;
      const RunReport rep = run_pipeline(spec, run_attr.empty() ? nullptr : &rows);
      detail::emit(run_out, detail::render_run(rep, run_format), out);
      if (!run_attr.empty() && !rep.explain_error) {
        std::ofstream f(run_attr, std::ios::binary);
        if (!f) throw IoError("cannot write '" + run_attr + "'");
        write_attributions_csv(rows, f);
      }
      if (rep.explain_error) {
        err << "error: " << *rep.explain_error << "\n";
        return kPartial;
      }
      if (verbose) err << "run: " << rep.model_name << " finished in " << rep.timings.total << " s\n";
      return kOk;
    }

    if (*bench) {
      std::vector<PipelineSpec> suite =
          bench_suite.empty() ? paper_suite(bench_yeast) : detail::load_suite_dir(bench_suite);
      for (auto& s : suite) bench_ovr.apply(s);
      const BenchmarkResult result = run_benchmark(suite);
      detail::emit(bench_out, detail::render_bench(result, bench_format), out);
      for (const auto& r : result.rows) {
        if (r.error) err << "error: " << r.source << "/" << r.task << "/" << r.family << ": " << *r.error << "\n";
        else if (r.report->explain_error)
          err << "error: " << r.source << "/" << r.task << "/" << r.family << ": " << *r.report->explain_error << "\n";
      }
      return result.all_ok() ? kOk : kPartial;
    }

    if (*ask) {
      if (ask_endpoint.empty() && ask_replay.empty())
        throw ValidationError("ask-llm: give --endpoint URL or --replay FIXTURE");
      if (!family_supported_by_executor(ask_family))
        throw ValidationError("ask-llm: family lstm renders a prompt but is not supported by the executor");
      const PromptTask task = *parse_prompt_task(ask_task);
      const std::string prompt = render_prompt(task, ask_family);
      std::unique_ptr<Transport> base;
      if (!ask_replay.empty()) base = std::make_unique<ReplayTransport>(load_fixture(ask_replay), ask_replay);
      else base = std::make_unique<HttpTransport>(HttpOptions{ask_endpoint, api_key_from_env()});
      RecordingTransport recorder(*base);
      const std::string transcript = ask_transcript.empty() ? ask_out + ".exchange.json" : ask_transcript;
      try {
        auto [spec, exchange] = request_pipeline(recorder, prompt, ask_opts);
        detail::write_file(ask_out, serialize_spec(spec));
        detail::write_file(transcript, to_json(exchange).dump(2) + "\n");
        if (!ask_record.empty()) save_fixture(recorder.recorded(), ask_record);
        out << "wrote " << ask_out << " (" << exchange.attempts.size() << " exchange"
            << (exchange.attempts.size() == 1 ? "" : "s") << ", " << exchange.retry_count() << " retr"
            << (exchange.retry_count() == 1 ? "y" : "ies") << ")\n";
        return kOk;
      } catch (const LlmError& e) {
        if (!ask_record.empty() && !recorder.recorded().exchanges.empty()) save_fixture(recorder.recorded(), ask_record);
        err << "error: " << e.what() << "\n";
        if (!e.raw_response().empty()) err << "raw response:\n" << e.raw_response() << "\n";
        return kRuntime;
      }
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const StageError& e) {
    err << "error: " << e.what() << "\n";
    return e.is_validation() ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace xplainbench::cli
