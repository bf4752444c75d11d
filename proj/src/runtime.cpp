// SPDX-License-Identifier: Apache-2.0
#include "gridedge/runtime.hpp"

#include <boost/asio.hpp>
#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <queue>
#include <set>
#include <thread>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace asio = boost::asio;
using asio::ip::tcp;

std::pair<std::string, int> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "address must be host:port, got `" + address + "`");
  const auto port = text::parse_int(std::string_view(address).substr(colon + 1));
  if (port < 0 || port > 65535) throw Error(Errc::InvalidArgument, "port out of range in `" + address + "`");
  return {address.substr(0, colon), static_cast<int>(port)};
}

// ====================================================================== live

struct LiveHost::Impl {
  struct Conn {
    Conn(asio::io_context& io, PeerId id_, Direction dir_, const LinkProfile& profile)
        : id(id_), socket(io), dir(dir_), link(profile), timer(io) {}
    PeerId id;
    tcp::socket socket;
    Direction dir;
    LinkScheduler link;
    asio::steady_timer timer;
    wire::FrameBuffer rx;
    std::array<char, 65536> buf{};
    std::deque<std::pair<double, std::string>> out;
    bool writing = false;
    bool open = true;
  };

  HostOptions opt;
  asio::io_context io;
  asio::thread_pool pool;
  std::optional<tcp::acceptor> acceptor;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  EventLog log;
  Node* node = nullptr;
  std::map<PeerId, std::shared_ptr<Conn>> conns;
  std::map<TimerId, std::shared_ptr<asio::steady_timer>> timers;
  PeerId next_peer = 1;
  TimerId next_timer = 1;
  bool stopping = false;
  int exit_code = 0;
  std::optional<asio::steady_timer> flush_deadline;

  explicit Impl(HostOptions o)
      : opt(std::move(o)),
        pool(std::max(1u, opt.workers)),
        log(opt.log_path, opt.node_id, [] { return std::chrono::system_clock::now(); }) {
    opt.link.validate();
  }

  double now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::shared_ptr<Conn> add_conn(Direction dir) {
    const PeerId id = next_peer++;
    auto profile = opt.link;
    profile.seed = opt.link.seed + static_cast<std::uint64_t>(id);
    auto c = std::make_shared<Conn>(io, id, dir, profile);
    conns[id] = c;
    return c;
  }

  void accept() {
    auto c = add_conn(Direction::Down);
    acceptor->async_accept(c->socket, [this, c](boost::system::error_code ec) {
      if (ec) {
        conns.erase(c->id);
        return;
      }
      if (stopping) {
        close(*c);
        return;
      }
      c->socket.set_option(tcp::no_delay(true));
      log.write("peer_accepted", {{"peer", std::to_string(c->id)}});
      read(c);
      accept();
    });
  }

  void read(const std::shared_ptr<Conn>& c) {
    c->socket.async_read_some(asio::buffer(c->buf), [this, c](boost::system::error_code ec, std::size_t n) {
      if (!c->open) return;
      if (ec) {
        lost(*c, ec == asio::error::eof ? "closed" : ec.message());
        return;
      }
      c->rx.append(std::string_view(c->buf.data(), n));
      try {
        while (auto env = c->rx.next()) {
          if (stopping || !c->open) return;
          node->on_message(c->id, *env);
        }
      } catch (const Error& e) {
        log.write("frame_error", {{"peer", std::to_string(c->id)}, {"error", e.what()}});
        lost(*c, "bad frame");
        return;
      }
      read(c);
    });
  }

  void lost(Conn& c, const std::string& why) {
    if (!c.open) return;
    close(c);
    if (stopping) return;
    log.write("peer_closed", {{"peer", std::to_string(c.id)}, {"reason", why}});
    node->on_disconnect(c.id);
  }

  void close(Conn& c) {
    c.open = false;
    c.out.clear();
    c.timer.cancel();
    boost::system::error_code ignored;
    c.socket.shutdown(tcp::socket::shutdown_both, ignored);
    c.socket.close(ignored);
  }

  void pump(const std::shared_ptr<Conn>& c) {
    if (!c->open || c->out.empty()) {
      c->writing = false;
      if (stopping) maybe_finish();
      return;
    }
    c->writing = true;
    const double wait = c->out.front().first - now();
    c->timer.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(std::max(0.0, wait))));
    c->timer.async_wait([this, c](boost::system::error_code ec) {
      if (ec || !c->open) return;
      asio::async_write(c->socket, asio::buffer(c->out.front().second),
                        [this, c](boost::system::error_code wec, std::size_t) {
                          if (wec) {
                            lost(*c, wec.message());
                            if (stopping) maybe_finish();
                            return;
                          }
                          c->out.pop_front();
                          pump(c);
                        });
    });
  }

  void maybe_finish() {
    for (const auto& [id, c] : conns) {
      if (c->open && (c->writing || !c->out.empty())) return;
    }
    finish();
  }

  void finish() {
    for (auto& [id, c] : conns) close(*c);
    for (auto& [id, t] : timers) t->cancel();
    timers.clear();
    io.stop();
  }
};

LiveHost::LiveHost(HostOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

LiveHost::~LiveHost() {
  impl_->pool.join();
}

int LiveHost::listen(const std::string& address) {
  auto [host, port] = split_address(address);
  tcp::resolver resolver(impl_->io);
  boost::system::error_code ec;
  const auto results = resolver.resolve(host.empty() ? "0.0.0.0" : host, std::to_string(port), ec);
  if (ec || results.empty()) throw Error(Errc::Io, "cannot resolve " + address + ": " + ec.message());
  tcp::endpoint ep = *results.begin();
  auto& acc = impl_->acceptor.emplace(impl_->io);
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(tcp::acceptor::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::Io, "cannot listen on " + address + ": " + ec.message());
  const int bound = acc.local_endpoint().port();
  impl_->log.write("listening", {{"address", address}, {"port", std::to_string(bound)}});
  return bound;
}

int LiveHost::run(Node& node) {
  impl_->node = &node;
  if (impl_->acceptor) impl_->accept();
  asio::post(impl_->io, [this, &node] { node.start(*this); });
  impl_->io.run();
  impl_->pool.join();
  return impl_->exit_code;
}

const std::string& LiveHost::node_id() const { return impl_->opt.node_id; }

double LiveHost::now() const { return impl_->now(); }

PeerId LiveHost::connect(const std::string& address) {
  auto [host, port] = split_address(address);
  tcp::resolver resolver(impl_->io);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(impl_->opt.connect_timeout_s));
  auto c = impl_->add_conn(Direction::Up);
  boost::system::error_code ec;
  for (;;) {
    const auto results = resolver.resolve(host.empty() ? "127.0.0.1" : host, std::to_string(port), ec);
    if (!ec) {
      asio::connect(c->socket, results, ec);
      if (!ec) break;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      impl_->conns.erase(c->id);
      throw Error(Errc::Io, "cannot connect to " + address + ": " + ec.message());
    }
    boost::system::error_code ignored;
    c->socket.close(ignored);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  c->socket.set_option(tcp::no_delay(true));
  impl_->log.write("connected", {{"peer", std::to_string(c->id)}, {"address", address}});
  impl_->read(c);
  return c->id;
}

void LiveHost::send(PeerId peer, const wire::Envelope& envelope) {
  const auto it = impl_->conns.find(peer);
  if (it == impl_->conns.end() || !it->second->open) return;
  auto& c = it->second;
  auto bytes = wire::encode(envelope);
  const auto d = c->link.schedule(bytes.size(), c->dir, impl_->now());
  if (d.dropped) {
    impl_->log.write("link_drop", {{"peer", std::to_string(peer)}, {"type", std::string(wire::to_string(envelope.type))}});
    return;
  }
  c->out.emplace_back(d.time, std::move(bytes));
  if (!c->writing) impl_->pump(c);
}

TimerId LiveHost::start_timer(double delay_s, std::function<void()> fn) {
  const TimerId id = impl_->next_timer++;
  auto t = std::make_shared<asio::steady_timer>(impl_->io);
  t->expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(std::max(0.0, delay_s))));
  impl_->timers[id] = t;
  t->async_wait([this, id, fn = std::move(fn)](boost::system::error_code ec) {
    if (ec || impl_->stopping) return;
    impl_->timers.erase(id);
    fn();
  });
  return id;
}

void LiveHost::cancel_timer(TimerId id) {
  const auto it = impl_->timers.find(id);
  if (it == impl_->timers.end()) return;
  it->second->cancel();
  impl_->timers.erase(it);
}

void LiveHost::run_async(std::function<std::function<void()>()> work) {
  asio::post(impl_->pool, [this, work = std::move(work)] {
    std::function<void()> next;
    try {
      next = work();
    } catch (const std::exception& e) {
      log("async_error", {{"error", e.what()}});
      return;
    }
    asio::post(impl_->io, [this, next = std::move(next)] {
      if (!impl_->stopping && next) next();
    });
  });
}

void LiveHost::log(std::string_view event, const Fields& fields) { impl_->log.write(event, fields); }

void LiveHost::stop(int exit_code) {
  if (impl_->stopping) return;
  impl_->stopping = true;
  impl_->exit_code = exit_code;
  impl_->log.write("stopping", {{"exit_code", std::to_string(exit_code)}});
  if (impl_->acceptor) {
    boost::system::error_code ignored;
    impl_->acceptor->close(ignored);
  }
  auto& deadline = impl_->flush_deadline.emplace(impl_->io);
  deadline.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(impl_->opt.flush_timeout_s)));
  deadline.async_wait([this](boost::system::error_code ec) {
    if (!ec) impl_->finish();
  });
  // Finish on the next turn so frames sent by the caller after stop() still go out.
  asio::post(impl_->io, [this] { impl_->maybe_finish(); });
}

// =================================================================== virtual

struct VirtualNetwork::Impl {
  struct Event {
    double time;
    std::uint64_t seq;
    std::function<void()> fn;
    std::function<bool()> live;  // empty: always; false: discard without advancing the clock
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  struct Link {
    Link(LinkProfile p) : scheduler(p) {}
    LinkScheduler scheduler;
    // Endpoint 0 dialed, endpoint 1 accepted.
    std::array<std::size_t, 2> host{};
    std::array<PeerId, 2> peer{};  // the id each endpoint uses for the other
    bool open = true;
    double last_delivery = 0.0;
  };

  class Host : public NodeHost {
   public:
    Host(Impl& net, std::size_t index, std::string node_id, Node& node)
        : net_(net), index_(index), id_(std::move(node_id)), node_(node),
          log_(net.log_dir.empty() ? "" : (std::filesystem::path(net.log_dir) / (id_ + ".log")).string(), id_,
               [&net] {
                 return net.epoch + std::chrono::duration_cast<std::chrono::system_clock::duration>(
                                        std::chrono::duration<double>(net.now));
               }) {}

    const std::string& node_id() const override { return id_; }
    double now() const override { return net_.now; }

    PeerId connect(const std::string& address) override {
      const auto it = net_.listeners.find(address);
      if (it == net_.listeners.end() || net_.hosts[it->second]->stopped) {
        throw Error(Errc::Io, "cannot connect to " + address + ": connection refused");
      }
      auto profile = net_.profile;
      profile.seed = net_.profile.seed + net_.links.size() + 1;
      auto& link = net_.links.emplace_back(std::make_unique<Link>(profile));
      const std::size_t link_index = net_.links.size() - 1;
      auto& other = *net_.hosts[it->second];
      const PeerId mine = next_peer_++;
      const PeerId theirs = other.next_peer_++;
      link->host = {index_, other.index_};
      link->peer = {mine, theirs};
      peers_[mine] = {link_index, 0};
      other.peers_[theirs] = {link_index, 1};
      log_.write("connected", {{"peer", std::to_string(mine)}, {"address", address}});
      return mine;
    }

    void send(PeerId peer, const wire::Envelope& envelope) override {
      if (stopped) return;
      const auto it = peers_.find(peer);
      if (it == peers_.end()) return;
      auto& link = *net_.links[it->second.first];
      if (!link.open) return;
      const int end = it->second.second;
      auto bytes = wire::encode(envelope);
      const auto d = link.scheduler.schedule(bytes.size(), end == 0 ? Direction::Up : Direction::Down, net_.now);
      if (d.dropped) {
        ++net_.dropped;
        log_.write("link_drop", {{"peer", std::to_string(peer)}, {"type", std::string(wire::to_string(envelope.type))}});
        return;
      }
      link.last_delivery = std::max(link.last_delivery, d.time);
      const std::size_t to = link.host[1 - end];
      const PeerId as = link.peer[1 - end];
      Link* l = &link;
      net_.push(d.time, [this, l, to, as, bytes = std::move(bytes)] {
        auto& dest = *net_.hosts[to];
        if (dest.stopped || !l->open) return;
        ++net_.delivered;
        dest.node_.on_message(as, wire::decode(bytes));
      });
    }

    TimerId start_timer(double delay_s, std::function<void()> fn) override {
      const TimerId id = next_timer_++;
      live_timers_.insert(id);
      net_.push(
          net_.now + std::max(0.0, delay_s),
          [this, id, fn = std::move(fn)] {
            if (stopped || !live_timers_.erase(id)) return;
            fn();
          },
          [this, id] { return !stopped && live_timers_.contains(id); });
      return id;
    }

    void cancel_timer(TimerId id) override { live_timers_.erase(id); }

    void run_async(std::function<std::function<void()>()> work) override {
      std::function<void()> next;
      try {
        next = work();
      } catch (const std::exception& e) {
        log("async_error", {{"error", e.what()}});
        return;
      }
      net_.push(net_.now, [this, next = std::move(next)] {
        if (!stopped && next) next();
      });
    }

    void log(std::string_view event, const Fields& fields) override { log_.write(event, fields); }

    void stop(int exit_code) override {
      if (stopped) return;
      stopped = true;
      code = exit_code;
      log_.write("stopping", {{"exit_code", std::to_string(exit_code)}});
      live_timers_.clear();
      for (const auto& [peer, where] : peers_) {
        Link* l = net_.links[where.first].get();
        if (!l->open) continue;
        const std::size_t other = l->host[1 - where.second];
        const PeerId as = l->peer[1 - where.second];
        // Frames already on the wire arrive before the close.
        net_.push(std::max(net_.now, l->last_delivery), [this, l, other, as] {
          if (!l->open) return;
          l->open = false;
          auto& dest = *net_.hosts[other];
          if (!dest.stopped) dest.node_.on_disconnect(as);
        });
      }
    }

    void start() { node_.start(*this); }

    bool stopped = false;
    int code = 0;

   private:
    Impl& net_;
    std::size_t index_;
    std::string id_;
    Node& node_;
    EventLog log_;
    std::map<PeerId, std::pair<std::size_t, int>> peers_;  // -> (link, endpoint)
    std::set<TimerId> live_timers_;
    PeerId next_peer_ = 1;
    TimerId next_timer_ = 1;
  };

  Impl(LinkProfile p, std::string dir, std::chrono::system_clock::time_point e)
      : profile(p), log_dir(std::move(dir)), epoch(e) {
    profile.validate();
  }

  void push(double t, std::function<void()> fn, std::function<bool()> live = {}) {
    queue.push(Event{t, next_seq++, std::move(fn), std::move(live)});
  }

  LinkProfile profile;
  std::string log_dir;
  std::chrono::system_clock::time_point epoch;
  double now = 0.0;
  std::uint64_t next_seq = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue;
  std::vector<std::unique_ptr<Host>> hosts;
  std::vector<std::unique_ptr<Link>> links;
  std::map<std::string, std::size_t> listeners;
};

VirtualNetwork::VirtualNetwork(LinkProfile link, std::string log_dir, std::chrono::system_clock::time_point epoch)
    : impl_(std::make_unique<Impl>(link, std::move(log_dir), epoch)) {}

VirtualNetwork::~VirtualNetwork() = default;

void VirtualNetwork::add(const std::string& node_id, Node& node, const std::string& listen_address) {
  for (const auto& h : impl_->hosts) {
    if (h->node_id() == node_id) throw Error(Errc::InvalidArgument, "duplicate node id " + node_id);
  }
  const std::size_t index = impl_->hosts.size();
  impl_->hosts.push_back(std::make_unique<Impl::Host>(*impl_, index, node_id, node));
  if (!listen_address.empty()) {
    if (!impl_->listeners.emplace(listen_address, index).second) {
      throw Error(Errc::InvalidArgument, "address " + listen_address + " already in use");
    }
  }
  auto* host = impl_->hosts.back().get();
  impl_->push(impl_->now, [host] { host->start(); });
}

void VirtualNetwork::run(double until) {
  while (!impl_->queue.empty()) {
    if (impl_->queue.top().time > until) {
      impl_->now = until;
      return;
    }
    auto ev = impl_->queue.top();
    impl_->queue.pop();
    if (ev.live && !ev.live()) continue;
    impl_->now = std::max(impl_->now, ev.time);
    ev.fn();
  }
}

double VirtualNetwork::now() const { return impl_->now; }

std::optional<int> VirtualNetwork::exit_code(const std::string& node_id) const {
  for (const auto& h : impl_->hosts) {
    if (h->node_id() == node_id) return h->stopped ? std::optional<int>(h->code) : std::nullopt;
  }
  throw Error(Errc::InvalidArgument, "no node " + node_id);
}

std::uint64_t VirtualNetwork::frames_delivered() const { return impl_->delivered; }
std::uint64_t VirtualNetwork::frames_dropped() const { return impl_->dropped; }

}  // namespace gridedge
