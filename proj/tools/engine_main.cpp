// engine: command-line front end.
//
//   engine run --input stdin|tcp://HOST:PORT [--config FILE] [--profile NAME]
//              [--sink log:PATH|null] [--control-port N] [--strict]
//   engine replay --fixture FILE [--config FILE] --out FILE [--strict]
//   engine record-template --fixture FILE --from MS --to MS --name NAME [--mode hold|rep]
//   engine config [--config FILE]
//
// Exit codes: 0 clean EOF, 1 usage/config error, 2 aborted stream (strict),
// 3 I/O error.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "touchless/commands.hpp"
#include "touchless/config.hpp"
#include "touchless/control.hpp"
#include "touchless/engine.hpp"
#include "touchless/exercise.hpp"
#include "touchless/frame_io.hpp"

namespace {

using namespace touchless;

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigError: return 1;
    case ErrorKind::IoError: return 3;
    default: return 2;
  }
}

EngineConfig read_config(const std::string& path) {
  if (path.empty()) return load_config(nlohmann::json());
  return load_config_file(path);
}

struct SinkHolder {
  std::ofstream file;
  std::unique_ptr<InputSink> sink;
};

SinkHolder open_sink(const std::string& spec) {
  SinkHolder h;
  if (spec == "null") {
    h.sink = std::make_unique<NullSink>();
  } else if (spec.starts_with("log:")) {
    const std::string path = spec.substr(4);
    if (path == "-") {
      h.sink = std::make_unique<LogSink>(std::cout);
    } else {
      h.file.open(path, std::ios::binary | std::ios::trunc);
      if (!h.file) throw Error(ErrorKind::IoError, "cannot write '" + path + "'", "sink");
      h.sink = std::make_unique<LogSink>(h.file);
    }
  } else {
    throw Error(ErrorKind::ConfigError, "sink must be null or log:PATH", "sink");
  }
  return h;
}

void print_summary(const RunStats& stats) { std::cerr << nlohmann::ordered_json{{"summary", stats.to_json()}}.dump() << '\n'; }

int cmd_run(const std::string& input, const std::string& config_path, const std::string& profile,
            const std::string& sink_spec, std::optional<int> control_port, bool strict) {
  EngineConfig config = read_config(config_path);
  if (!profile.empty()) config = set_field(config, "profile", profile);
  if (!sink_spec.empty()) config = set_field(config, "sink", sink_spec);
  SinkHolder sink = open_sink(config.sink);

  std::unique_ptr<TcpInput> tcp;
  std::istream* in = &std::cin;
  if (input != "stdin" && input != "-") {
    tcp = std::make_unique<TcpInput>(input);
    in = &tcp->stream();
  }

  Engine engine(config);
  std::unique_ptr<ControlHub> hub;
  std::unique_ptr<ControlServer> server;
  RunOptions options;
  options.strict = strict;
  options.warnings = &std::cerr;
  if (control_port) {
    if (*control_port < 0 || *control_port > 65535)
      throw Error(ErrorKind::ConfigError, "control port must be in 0..65535", "control-port");
    hub = std::make_unique<ControlHub>(config);
    server = std::make_unique<ControlServer>(*hub, static_cast<std::uint16_t>(*control_port));
    std::cerr << nlohmann::ordered_json{{"control_port", server->port()}}.dump() << '\n';
    options.observer = hub.get();
  }
  const RunStats stats = run(engine, *in, *sink.sink, options);
  if (server) server->stop();
  print_summary(stats);
  return 0;
}

int cmd_replay(const std::string& fixture, const std::string& config_path, const std::string& out, bool strict) {
  EngineConfig config = read_config(config_path);
  std::ifstream in(fixture, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open fixture '" + fixture + "'", "fixture");
  SinkHolder sink = open_sink("log:" + out);
  Engine engine(config);
  RunOptions options;
  options.strict = strict;
  options.warnings = &std::cerr;
  const RunStats stats = run(engine, in, *sink.sink, options);
  print_summary(stats);
  return 0;
}

int cmd_record(const std::string& fixture, double from_ms, double to_ms, const std::string& name,
               const std::string& mode, const std::string& config_path) {
  if (!(from_ms <= to_ms)) throw Error(ErrorKind::ConfigError, "--from must not be after --to", "from");
  const EngineConfig config = read_config(config_path);
  std::ifstream in(fixture, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open fixture '" + fixture + "'", "fixture");
  std::vector<PoseFeatures> frames;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LandmarkFrame f;
    try {
      f = parse_frame(line);
    } catch (const Error& e) {
      std::cerr << "line " << n << ": skipped: " << e.what() << '\n';
      continue;
    }
    if (f.t_ms < from_ms || f.t_ms > to_ms || !f.pose) continue;
    frames.push_back(extract_features(*f.pose, f.image, config.exercise.min_visibility));
  }
  const auto t = record_template(frames, name, mode == "rep" ? TemplateMode::PerRep : TemplateMode::WhileActive);
  std::cout << serialize_template(t) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Touchless input engine: landmark frames in, input commands out"};
  app.require_subcommand(1);

  std::string input = "stdin", config_path, profile, sink_spec;
  int control_port = -1;
  bool strict = false;
  auto* run_cmd = app.add_subcommand("run", "Process a live frame stream");
  run_cmd->add_option("--input", input, "stdin or tcp://HOST:PORT");
  run_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--profile", profile, "Binding profile (overrides the config)");
  run_cmd->add_option("--sink", sink_spec, "log:PATH (- for stdout) or null (overrides the config)");
  auto* port_opt = run_cmd->add_option("--control-port", control_port, "Serve the control protocol on 127.0.0.1:N (0 = any)");
  run_cmd->add_flag("--strict", strict, "Abort on the first bad line");

  std::string fixture, out;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a fixture into a command log");
  replay_cmd->add_option("--fixture", fixture, "Frame NDJSON file")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", out, "Command log path (- for stdout)")->required();
  replay_cmd->add_flag("--strict", strict, "Abort on the first bad line");

  double from_ms = 0.0, to_ms = 0.0;
  std::string name, mode = "hold";
  auto* record_cmd = app.add_subcommand("record-template", "Build an exercise template from a fixture segment");
  record_cmd->add_option("--fixture", fixture, "Frame NDJSON file")->required()->check(CLI::ExistingFile);
  record_cmd->add_option("--from", from_ms, "Segment start, ms")->required();
  record_cmd->add_option("--to", to_ms, "Segment end, ms")->required();
  record_cmd->add_option("--name", name, "Template name")->required();
  record_cmd->add_option("--mode", mode, "hold (active while matched) or rep (one event per match)")
      ->check(CLI::IsMember({"hold", "rep"}));
  record_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);

  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration document");
  config_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd)
      return cmd_run(input, config_path, profile, sink_spec,
                     port_opt->count() ? std::optional<int>(control_port) : std::nullopt, strict);
    if (*replay_cmd) return cmd_replay(fixture, config_path, out, strict);
    if (*record_cmd) return cmd_record(fixture, from_ms, to_ms, name, mode, config_path);
    if (*config_cmd) {
      std::cout << config_to_json(read_config(config_path)).dump(2) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "engine: " << e.what() << '\n';
    return exit_code(e);
  }
  return 1;
}
