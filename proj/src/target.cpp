#include "advexp/target.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <numeric>

#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace advexp {

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

TargetAdapter::TargetAdapter(const TargetModel& model) : model_(model), labels_(model.labels()) {}

int TargetAdapter::label_index(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw std::invalid_argument("label '" + label + "' unknown to target");
  return static_cast<int>(it - labels_.begin());
}

std::vector<double> TargetAdapter::predict(const LabeledText& text) {
  std::vector<double> probs;
  ++queries_;
  if (model_.concurrent()) {
    probs = model_.predict(text);
  } else {
    std::lock_guard lock(serial_);
    probs = model_.predict(text);
  }
  if (probs.size() != labels_.size()) throw AdapterError("target returned " + std::to_string(probs.size()) +
                                                         " probabilities for " + std::to_string(labels_.size()) +
                                                         " labels");
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!std::isfinite(sum) || std::abs(sum - 1.0) > 1e-6 ||
      std::any_of(probs.begin(), probs.end(), [](double p) { return p < 0.0; }))
    throw AdapterError("target probabilities do not form a distribution");
  return probs;
}

// ---------------------------------------------------------------------------
// LineChannel

LineChannel::LineChannel(const std::string& endpoint) {
  if (endpoint.rfind("exec:", 0) == 0) {
    const std::string cmd = endpoint.substr(5);
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw AdapterError("pipe() failed");
    const pid_t pid = fork();
    if (pid < 0) throw AdapterError("fork() failed");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    child_pid_ = pid;
    std::signal(SIGPIPE, SIG_IGN);
  } else if (endpoint.rfind("unix:", 0) == 0) {
    const std::string path = endpoint.substr(5);
    const int fd = socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0) throw AdapterError("socket() failed");
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) throw AdapterError("socket path too long: " + path);
    std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
    if (connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      close(fd);
      throw AdapterError("cannot connect to " + path + ": " + std::strerror(errno));
    }
    read_fd_ = write_fd_ = fd;
    std::signal(SIGPIPE, SIG_IGN);
  } else {
    throw std::invalid_argument("unknown endpoint '" + endpoint + "' (expected exec:<cmd> or unix:<path>)");
  }
}

LineChannel::~LineChannel() {
  if (write_fd_ >= 0) close(write_fd_);
  if (read_fd_ >= 0 && read_fd_ != write_fd_) close(read_fd_);
  if (child_pid_ > 0) {
    int status = 0;
    waitpid(child_pid_, &status, 0);
  }
}

std::string LineChannel::request(const std::string& line) {
  std::lock_guard lock(mu_);
  std::string msg = line + "\n";
  std::size_t off = 0;
  while (off < msg.size()) {
    const ssize_t n = write(write_fd_, msg.data() + off, msg.size() - off);
    if (n <= 0) throw AdapterError("write to endpoint failed");
    off += static_cast<std::size_t>(n);
  }
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return out;
    }
    char chunk[4096];
    const ssize_t n = read(read_fd_, chunk, sizeof chunk);
    if (n <= 0) throw AdapterError("endpoint closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string external_request(const LabeledText& text) {
  nlohmann::json req;
  if (is_pair(text.kind)) {
    req["text"] = {text.sentences[0].surface(), text.sentences[1].surface()};
  } else {
    std::string joined;
    for (const auto& s : text.sentences) {
      if (!joined.empty()) joined += ' ';
      joined += s.surface();
    }
    req["text"] = joined;
  }
  return req.dump();
}

ExternalTarget::ExternalTarget(const std::string& endpoint, std::vector<std::string> labels)
    : labels_(std::move(labels)), channel_(std::make_unique<LineChannel>(endpoint)) {
  if (labels_.empty()) throw std::invalid_argument("external target needs a label list");
}

std::vector<double> ExternalTarget::predict(const LabeledText& text) const {
  const std::string reply = channel_->request(external_request(text));
  try {
    return nlohmann::json::parse(reply).at("probs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw AdapterError(std::string("bad target response: ") + e.what());
  }
}

}  // namespace advexp
