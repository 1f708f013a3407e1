#pragma once

// Built-in subjects and the registration API for external ones.

#include <charconv>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltlfuzz/harness.hpp"

namespace ltlfuzz {

/// Everything needed to fuzz one subject: its factory and shipped property + map.
struct SubjectInfo {
  std::string name;
  /// Changes whenever the subject's behavior changes; stamped into reports.
  std::string version;
  std::string description;
  std::string property;
  std::string map_json;
  bool liveness = false;
  std::function<std::unique_ptr<Target>()> make;
};

class SubjectRegistry {
 public:
  static SubjectRegistry& instance() {
    static SubjectRegistry registry;
    return registry;
  }

  /// Registers (or replaces) a subject under `info.name`.
  void add(SubjectInfo info) { subjects_[info.name] = std::move(info); }

  const SubjectInfo* find(const std::string& name) const {
    auto it = subjects_.find(name);
    return it == subjects_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : subjects_) out.push_back(n);
    return out;
  }

 private:
  SubjectRegistry();
  std::map<std::string, SubjectInfo> subjects_;
};

namespace subjects {

/// Shared plumbing: owns the location graph and buffers observations for one feed().
class SubjectBase : public Target {
 public:
  const LocationGraph& location_graph() const override { return graph_; }

  std::vector<Observation> feed(std::string_view message) override {
    obs_.clear();
    StepCounter steps(step_budget());
    steps_ = &steps;
    handle(message);
    steps_ = nullptr;
    if (steps.exhausted()) obs_.push_back(Observation::exhausted());
    return std::move(obs_);
  }

 protected:
  virtual void handle(std::string_view message) = 0;

  void visit(LocationId l) { obs_.push_back(Observation::visit(l)); }
  void fire(const char* prop, LocationId l) {
    obs_.push_back(Observation::visit(l));
    obs_.push_back(Observation::fire(prop, l, true));
  }
  /// False once the step budget is spent; callers must stop processing.
  bool tick(std::uint64_t n = 1) { return steps_->tick(n); }

  static std::pair<std::string_view, std::string_view> split_command(std::string_view msg) {
    auto sp = msg.find(' ');
    if (sp == std::string_view::npos) return {msg, {}};
    return {msg.substr(0, sp), msg.substr(sp + 1)};
  }

  static bool parse_number(std::string_view s, std::uint64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  }

  LocationGraph graph_;

 private:
  std::vector<Observation> obs_;
  StepCounter* steps_ = nullptr;
};

// ---------------------------------------------------------------------------
// quota-ftp: an FTP upload path with a per-user quota. In the shipped version
// the quota check compares against max_filesize, which starts at -1, so the
// assignment that would detect overflow never runs: once over quota, writes
// are silently refused and the transfer loop keeps accepting data without
// ever sending the 552 reply.

class QuotaFtp : public SubjectBase {
 public:
  explicit QuotaFtp(bool patched = false) : patched_(patched) {
    auto& g = graph_;
    entry_ = g.add("session:entry");
    parser_ = g.add("ftpd.c:parser");
    user_ = g.add("ftpd.c:douser");
    pass_ = g.add("ftpd.c:dopass");
    site_quota_ = g.add("ftpd.c:6063");
    flag_n_ = g.add("ftpd.c:6064");
    quota_on_ = g.add("ftpd.c:6072");
    stor_ = g.add("ftpd.c:dostor");
    appe_ = g.add("ftpd.c:doappe");
    data_ = g.add("ftpd.c:dodata");
    data_refused_ = g.add("ftpd.c:425");
    loop_ = g.add("ftpd.c:4067", true);
    write_ = g.add("safe_rw.c:12");
    append_ = g.add("safe_rw.c:43");
    quota_check_ = g.add("ftpd.c:4315");
    reply_552_ = g.add("ftpd.c:4444");
    reply_552_appe_ = g.add("ftpd.c:3481");
    write_ok_ = g.add("ftpd.c:write_ok");
    abor_ = g.add("ftpd.c:doabor");
    noop_ = g.add("ftpd.c:donoop");
    unknown_ = g.add("ftpd.c:500");

    g.edge(entry_, parser_);
    for (LocationId h : {user_, pass_, site_quota_, stor_, appe_, data_, abor_, noop_, unknown_}) {
      g.edge(parser_, h);
      if (h != data_ && h != site_quota_) g.edge(h, parser_);
    }
    g.edge(site_quota_, flag_n_);
    g.edge(site_quota_, parser_);
    g.edge(flag_n_, quota_on_);
    g.edge(flag_n_, parser_);
    g.edge(quota_on_, parser_);
    g.edge(data_, data_refused_);
    g.edge(data_refused_, parser_);
    g.edge(data_, loop_);
    g.edge(loop_, write_);
    g.edge(loop_, append_);
    g.edge(write_, quota_check_);
    g.edge(append_, quota_check_);
    g.edge(quota_check_, reply_552_);
    g.edge(quota_check_, reply_552_appe_);
    g.edge(quota_check_, write_ok_);
    g.edge(reply_552_, parser_);
    g.edge(reply_552_appe_, parser_);
    g.edge(write_ok_, loop_);
    g.edge(write_ok_, parser_);
    reset();
  }

  void reset() override {
    user_name_.clear();
    logged_in_ = false;
    quota_activated_ = false;
    user_quota_size_ = 0;
    user_dir_size_ = 0;
    transfer_open_ = false;
    append_mode_ = false;
    file_name_.clear();
  }

  std::string addressable_state() const override {
    std::string s;
    s += user_name_;
    s += '\0';
    s += file_name_;
    s += '\0';
    s += logged_in_ ? '1' : '0';
    s += quota_activated_ ? '1' : '0';
    s += transfer_open_ ? '1' : '0';
    s += append_mode_ ? '1' : '0';
    s += std::to_string(user_quota_size_) + ',' + std::to_string(user_dir_size_);
    return s;
  }

  std::vector<std::string> dictionary() const override {
    return {"USER ftp",        "PASS ftp",          "QUOTA -n 8", "QUOTA -d 8", "QUOTA -n 4096",
            "STOR upload.bin", "APPE log.txt",      "DATA 0123456789abcdef",    "DATA x",
            "ABOR",            "NOOP"};
  }

 protected:
  void handle(std::string_view msg) override {
    visit(parser_);
    if (!tick()) return;
    auto [cmd, arg] = split_command(msg);
    if (cmd == "USER") {
      visit(user_);
      user_name_ = std::string(arg.substr(0, 32));
      logged_in_ = false;
    } else if (cmd == "PASS") {
      visit(pass_);
      logged_in_ = !user_name_.empty();
    } else if (cmd == "QUOTA") {
      site_quota(arg);
    } else if (cmd == "STOR" || cmd == "APPE") {
      visit(cmd == "STOR" ? stor_ : appe_);
      if (arg.empty()) return;
      transfer_open_ = true;
      append_mode_ = cmd == "APPE";
      file_name_ = std::string(arg.substr(0, 32));
    } else if (cmd == "DATA") {
      data(arg);
    } else if (cmd == "ABOR") {
      visit(abor_);
      transfer_open_ = false;
    } else if (cmd == "NOOP") {
      visit(noop_);
    } else {
      visit(unknown_);
    }
  }

 private:
  // QUOTA -<flags> <size>: flag 'n' enables quotas with the given size in bytes.
  void site_quota(std::string_view arg) {
    visit(site_quota_);
    if (arg.size() < 2 || arg[0] != '-') return;
    auto [flags, size] = split_command(arg);
    for (char f : flags.substr(1)) {
      if (!tick()) return;
      if (f != 'n') continue;
      visit(flag_n_);
      std::uint64_t bytes = 0;
      if (!parse_number(size, bytes) || bytes > 1'000'000) return;
      user_quota_size_ = bytes;
      quota_activated_ = true;
      fire("a", quota_on_);
      return;
    }
  }

  // One iteration of the transfer loop per DATA message.
  void data(std::string_view payload) {
    visit(data_);
    if (!transfer_open_) {
      visit(data_refused_);
      return;
    }
    fire("l", loop_);
    const LocationId write_site = append_mode_ ? append_ : write_;
    visit(write_site);
    if (!tick(payload.size() + 1)) return;
    if (quota_activated_ && user_dir_size_ > user_quota_size_) {
      fire("o", write_site);
    } else {
      user_dir_size_ += payload.size();
    }
    visit(quota_check_);
    // The shipped code only assigns max_filesize when it is already >= 0.
    long long max_filesize = -1;
    bool overflow = false;
    if (patched_) {
      max_filesize = static_cast<long long>(user_quota_size_) - static_cast<long long>(user_dir_size_);
      overflow = quota_activated_ && max_filesize < 0;
    } else if (max_filesize >= 0) {
      overflow = quota_activated_ &&
                 (max_filesize = static_cast<long long>(user_quota_size_) - static_cast<long long>(user_dir_size_)) < 0;
    }
    if (overflow) {
      fire("n", append_mode_ ? reply_552_appe_ : reply_552_);
      transfer_open_ = false;
      return;
    }
    visit(write_ok_);
  }

  bool patched_;
  LocationId entry_, parser_, user_, pass_, site_quota_, flag_n_, quota_on_, stor_, appe_, data_, data_refused_,
      loop_, write_, append_, quota_check_, reply_552_, reply_552_appe_, write_ok_, abor_, noop_, unknown_;

  std::string user_name_;
  bool logged_in_ = false;
  bool quota_activated_ = false;
  std::uint64_t user_quota_size_ = 0;
  std::uint64_t user_dir_size_ = 0;
  bool transfer_open_ = false;
  bool append_mode_ = false;
  std::string file_name_;
};

inline constexpr const char* kQuotaProperty = "# the server must answer 552 once the user quota is exceeded\n"
                                              "!F(a & F(o & G !n))\n";

inline constexpr const char* kQuotaMap = R"({
  "propositions": {
    "a": [{"location": "ftpd.c:6072", "condition": "quota_activated == true"}],
    "o": [{"location": "safe_rw.c:12", "condition": "user_dir_size > user_quota"},
          {"location": "safe_rw.c:43", "condition": "user_dir_size > user_quota"}],
    "n": [{"location": "ftpd.c:4444", "condition": "msg_quota_exceeded == true"},
          {"location": "ftpd.c:3481", "condition": "msg_quota_exceeded == true"}],
    "l": [{"location": "ftpd.c:4067", "condition": "loop_entry == true"}]
  },
  "loop_headers": ["l"]
})";

// ---------------------------------------------------------------------------
// auth-copy: FTP-style copy commands. CPTO is meant to require an
// authenticated session, but the shipped check only tests that USER was sent.

class AuthCopy : public SubjectBase {
 public:
  AuthCopy() {
    auto& g = graph_;
    entry_ = g.add("session:entry");
    loop_ = g.add("main.c:cmd_loop");
    user_ = g.add("auth.c:user");
    pass_ = g.add("auth.c:pass");
    login_ok_ = g.add("auth.c:login_ok");
    cpfr_ = g.add("mod_copy.c:cpfr");
    cpto_ = g.add("mod_copy.c:cpto");
    auth_check_ = g.add("mod_copy.c:auth_check");
    copy_ = g.add("mod_copy.c:copy_file");
    deny_ = g.add("mod_copy.c:550");
    noop_ = g.add("main.c:noop");
    quit_ = g.add("main.c:quit");
    unknown_ = g.add("main.c:500");

    g.edge(entry_, loop_);
    for (LocationId h : {user_, pass_, cpfr_, cpto_, noop_, quit_, unknown_}) g.edge(loop_, h);
    for (LocationId h : {user_, cpfr_, noop_, quit_, unknown_, deny_, copy_, login_ok_}) g.edge(h, loop_);
    g.edge(pass_, login_ok_);
    g.edge(pass_, deny_);
    g.edge(cpto_, auth_check_);
    g.edge(cpto_, copy_);
    g.edge(cpto_, deny_);
    g.edge(auth_check_, copy_);
    reset();
  }

  void reset() override {
    user_name_.clear();
    authenticated_ = false;
    copy_src_.clear();
    copies_ = 0;
  }

  std::string addressable_state() const override {
    return user_name_ + '\0' + copy_src_ + '\0' + (authenticated_ ? '1' : '0') + std::to_string(copies_);
  }

  std::vector<std::string> dictionary() const override {
    return {"USER alice", "USER anonymous", "PASS secret", "PASS guess", "CPFR /etc/motd",
            "CPTO /srv/www/motd", "NOOP", "QUIT"};
  }

 protected:
  void handle(std::string_view msg) override {
    visit(loop_);
    if (!tick()) return;
    auto [cmd, arg] = split_command(msg);
    if (cmd == "USER") {
      visit(user_);
      user_name_ = std::string(arg.substr(0, 32));
      authenticated_ = false;
    } else if (cmd == "PASS") {
      visit(pass_);
      if (user_name_ == "alice" && arg == "secret") {
        authenticated_ = true;
        fire("login", login_ok_);
      } else {
        visit(deny_);
      }
    } else if (cmd == "CPFR") {
      fire("copy_req", cpfr_);
      copy_src_ = std::string(arg.substr(0, 64));
    } else if (cmd == "CPTO") {
      fire("copy_req", cpto_);
      if (copy_src_.empty() || arg.empty()) {
        visit(deny_);
        return;
      }
      if (authenticated_) {
        fire("login", auth_check_);
      } else if (user_name_.empty()) {
        // Intended check is authenticated_; the shipped one accepts any USER.
        visit(deny_);
        return;
      }
      ++copies_;
      copy_src_.clear();
      fire("copy_ok", copy_);
    } else if (cmd == "NOOP") {
      visit(noop_);
    } else if (cmd == "QUIT") {
      visit(quit_);
      reset();
    } else {
      visit(unknown_);
    }
  }

 private:
  LocationId entry_, loop_, user_, pass_, login_ok_, cpfr_, cpto_, auth_check_, copy_, deny_, noop_, quit_, unknown_;
  std::string user_name_;
  bool authenticated_ = false;
  std::string copy_src_;
  std::uint32_t copies_ = 0;
};

inline constexpr const char* kAuthCopyProperty =
    "# a client that has not logged in must not be allowed to copy files\n"
    "G(!login -> X G(copy_req -> X !copy_ok))\n";

inline constexpr const char* kAuthCopyMap = R"({
  "propositions": {
    "login": [{"location": "auth.c:login_ok", "condition": "session.authenticated"},
              {"location": "mod_copy.c:auth_check", "condition": "session.authenticated"}],
    "copy_req": [{"location": "mod_copy.c:cpfr", "condition": "request == CopyFiles"},
                 {"location": "mod_copy.c:cpto", "condition": "request == CopyFiles"}],
    "copy_ok": [{"location": "mod_copy.c:copy_file", "condition": "response == CopySuccessful"}]
  },
  "loop_headers": []
})";

// ---------------------------------------------------------------------------
// handshake: a TLS-like server state machine. A ChangeCipherSpec that arrives
// after a key exchange requesting session resumption takes a fast path that
// forgets to answer, so the next server output is neither a ChangeCipherSpec
// response nor an Alert.

class Handshake : public SubjectBase {
 public:
  Handshake() {
    auto& g = graph_;
    entry_ = g.add("session:entry");
    dispatch_ = g.add("s3_srvr.c:dispatch");
    client_hello_ = g.add("s3_srvr.c:client_hello");
    server_hello_ = g.add("s3_srvr.c:server_hello");
    key_exchange_ = g.add("s3_srvr.c:key_exchange");
    ccs_ = g.add("s3_pkt.c:ccs_request");
    ccs_resp_ = g.add("s3_srvr.c:ccs_response");
    finished_ = g.add("s3_srvr.c:finished");
    app_data_ = g.add("s3_pkt.c:app_data");
    alert_ = g.add("s3_pkt.c:alert");
    unknown_ = g.add("s3_pkt.c:unknown_record");

    g.edge(entry_, dispatch_);
    for (LocationId h : {client_hello_, key_exchange_, ccs_, finished_, app_data_, unknown_}) g.edge(dispatch_, h);
    g.edge(client_hello_, server_hello_);
    g.edge(client_hello_, alert_);
    g.edge(key_exchange_, alert_);
    g.edge(ccs_, ccs_resp_);
    g.edge(ccs_, alert_);
    g.edge(finished_, alert_);
    g.edge(app_data_, alert_);
    for (LocationId h : {server_hello_, key_exchange_, ccs_, ccs_resp_, finished_, app_data_, alert_, unknown_})
      g.edge(h, dispatch_);
    reset();
  }

  void reset() override {
    state_ = State::Idle;
    resume_ = false;
    epoch_ = 0;
  }

  std::string addressable_state() const override {
    return std::to_string(static_cast<int>(state_)) + (resume_ ? "r" : "-") + std::to_string(epoch_);
  }

  std::vector<std::string> dictionary() const override {
    return {"CLIENT_HELLO", "KEY_EXCHANGE", "KEY_EXCHANGE resume", "CHANGE_CIPHER_SPEC",
            "FINISHED",     "APP_DATA ping", "ALERT"};
  }

 protected:
  void handle(std::string_view msg) override {
    visit(dispatch_);
    if (!tick()) return;
    auto [cmd, arg] = split_command(msg);
    if (cmd == "CLIENT_HELLO") {
      visit(client_hello_);
      if (state_ == State::Idle || state_ == State::Done) {
        state_ = State::HelloSent;
        resume_ = false;
        fire("hello", server_hello_);
      } else {
        alert();
      }
    } else if (cmd == "KEY_EXCHANGE") {
      visit(key_exchange_);
      if (state_ != State::HelloSent) return alert();
      state_ = State::KeyExchanged;
      resume_ = arg == "resume";
    } else if (cmd == "CHANGE_CIPHER_SPEC") {
      fire("ccs", ccs_);
      if (state_ != State::KeyExchanged) return alert();
      ++epoch_;
      if (resume_) {
        // Resumption fast path: the response is never queued.
        state_ = State::CcsPending;
        return;
      }
      state_ = State::CcsDone;
      fire("ccs_ok", ccs_resp_);
    } else if (cmd == "FINISHED") {
      visit(finished_);
      if (state_ != State::CcsDone && state_ != State::CcsPending) return alert();
      state_ = State::Done;
      fire("fin", finished_);
    } else if (cmd == "APP_DATA") {
      visit(app_data_);
      if (state_ != State::Done) alert();
    } else if (cmd == "ALERT") {
      state_ = State::Idle;
      visit(unknown_);
    } else {
      visit(unknown_);
    }
  }

 private:
  enum class State { Idle, HelloSent, KeyExchanged, CcsPending, CcsDone, Done };

  void alert() {
    state_ = State::Idle;
    fire("alert", alert_);
  }

  LocationId entry_, dispatch_, client_hello_, server_hello_, key_exchange_, ccs_, ccs_resp_, finished_, app_data_,
      alert_, unknown_;
  State state_ = State::Idle;
  bool resume_ = false;
  std::uint32_t epoch_ = 0;
};

inline constexpr const char* kHandshakeProperty =
    "# after ServerHello, a ChangeCipherSpec request must be answered by a\n"
    "# ChangeCipherSpec response or an Alert\n"
    "G(hello -> X(ccs -> X(ccs_ok | alert)))\n";

inline constexpr const char* kHandshakeMap = R"({
  "propositions": {
    "hello": [{"location": "s3_srvr.c:server_hello", "condition": "response == ServerHello"}],
    "ccs": [{"location": "s3_pkt.c:ccs_request", "condition": "request == ChangeCipherSpec"}],
    "ccs_ok": [{"location": "s3_srvr.c:ccs_response", "condition": "response == ChangeCipherSpec"}],
    "alert": [{"location": "s3_pkt.c:alert", "condition": "response == Alert"}],
    "fin": [{"location": "s3_srvr.c:finished", "condition": "response == Finished"}]
  },
  "loop_headers": []
})";

}  // namespace subjects

inline SubjectRegistry::SubjectRegistry() {
  add({"quota-ftp", "quota-ftp/1", "FTP upload path whose quota check never fires (liveness bug)",
       subjects::kQuotaProperty, subjects::kQuotaMap, true,
       [] { return std::make_unique<subjects::QuotaFtp>(false); }});
  add({"clean-subject", "clean-subject/1", "quota-ftp with the quota check fixed; no violation exists",
       subjects::kQuotaProperty, subjects::kQuotaMap, true,
       [] { return std::make_unique<subjects::QuotaFtp>(true); }});
  add({"auth-copy", "auth-copy/1", "FTP copy commands reachable without login (safety bug)",
       subjects::kAuthCopyProperty, subjects::kAuthCopyMap, false,
       [] { return std::make_unique<subjects::AuthCopy>(); }});
  add({"handshake", "handshake/1", "TLS-like handshake that drops a ChangeCipherSpec response (safety bug)",
       subjects::kHandshakeProperty, subjects::kHandshakeMap, false,
       [] { return std::make_unique<subjects::Handshake>(); }});
}

}  // namespace ltlfuzz
