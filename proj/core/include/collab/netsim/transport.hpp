#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "collab/netsim/address.hpp"

namespace collab::netsim {

using TimerId = std::uint64_t;
using StreamId = std::uint64_t;

class StreamListener {
 public:
  virtual ~StreamListener() = default;
  // Acceptor side only: a peer opened a stream to a service we listen on.
  virtual void on_stream_open(StreamId id, const EndpointAddr& peer, const std::string& service) = 0;
  virtual void on_stream_message(StreamId id, Bytes message) = 0;
  virtual void on_stream_closed(StreamId id, std::string_view reason) = 0;
};

// The one interface every protocol module talks to. Simulated endpoints and
// the socket adapter both implement it; protocols never read an OS clock.
//
// Datagrams are unreliable and capped at kMaxDatagram bytes. Streams are
// reliable, ordered and message-framed.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual const EndpointAddr& local_addr() const = 0;
  virtual SimTime now() const = 0;

  virtual void send(const EndpointAddr& dst, ByteView payload) = 0;
  virtual void set_receiver(std::function<void(const Datagram&)> handler) = 0;

  virtual TimerId schedule(SimTime delay, std::function<void()> fn) = 0;
  virtual void cancel(TimerId id) = 0;

  virtual void listen(const std::string& service, StreamListener* listener) = 0;
  virtual StreamId connect(const EndpointAddr& dst, const std::string& service, StreamListener* listener) = 0;
  virtual void stream_send(StreamId id, ByteView message) = 0;
  virtual void stream_close(StreamId id) = 0;
};

}  // namespace collab::netsim
