// LD_PRELOAD shim that denies all network access: socket() and connect()
// fail with EACCES. Local files stay usable.
#include <cerrno>
#include <sys/socket.h>

extern "C" {

int socket(int, int, int) {
  errno = EACCES;
  return -1;
}

int connect(int, const struct sockaddr*, socklen_t) {
  errno = EACCES;
  return -1;
}

}
